"""Deterministic random streams.

Every random draw in the toolkit comes from a Philox (counter-based) bit
generator whose key is derived from ``(master_seed, tag, *indices)``:

* ``tag`` is a short ASCII name of the consumer (``"rb-seq"``, ``"prep"``,
  ``"shots"``, ...), mapped to an integer with CRC-32;
* ``indices`` are non-negative task coordinates, e.g. ``(m_index, seq_index)``.

The tuple is fed to :class:`numpy.random.SeedSequence` as
``entropy=master_seed, spawn_key=(crc32(tag), *indices)``. A task's stream
therefore depends only on its coordinates, never on execution order or on
how many workers run the batch.
"""
from __future__ import annotations

import zlib

import numpy as np


def tag_id(tag: str) -> int:
    return zlib.crc32(tag.encode("ascii"))


def derive_rng(master_seed: int, tag: str, *indices: int) -> np.random.Generator:
    """Return the generator for task ``indices`` of stream ``tag``."""
    if master_seed < 0 or any(i < 0 for i in indices):
        raise ValueError("seed and task indices must be non-negative")
    seq = np.random.SeedSequence(entropy=int(master_seed),
                                 spawn_key=(tag_id(tag), *map(int, indices)))
    return np.random.Generator(np.random.Philox(seq))


def child_seed(rng: np.random.Generator) -> int:
    """Draw a 63-bit seed from ``rng`` (used to hand a plain int downstream)."""
    return int(rng.integers(0, 2**63 - 1))
