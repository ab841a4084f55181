"""Zero-fidelity randomized benchmarking and its interleaved variant.

A length-``m`` sequence applies ``m`` uniformly random Cliffords (each
optionally followed by an interleaved target circuit) and then the single
Clifford that inverts the whole ideal word, so the ideal sequence is the
identity channel. Its zero-fidelity therefore compares the measured
``Tr[S(rho_i) W_j]`` against ``Tr[rho_i W_j]``.

Random streams (derived from one base seed):

* ``"rb-seq", m, l``: the Cliffords of sequence ``l`` at length ``m``; the
  same stream is used with and without interleaving and for every SPAM
  setting, so comparisons use common random sequences;
* ``"prep", l``: preparation errors of sequence slot ``l``, shared across
  lengths;
* ``"shots", m, l``: shot noise.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from zerofid.circuit import Circuit, NoiseModel, advance, prepare_state, read_out
from zerofid.errors import InvalidArgumentError, UnsupportedError
from zerofid.fidelity import zero_fidelity_from_tables
from zerofid.parallel import ordered_map
from zerofid.qstate import pauli_expectations, sic_stack
from zerofid.rbfold.clifford import (
    MAX_CLIFFORD_QUBITS,
    CliffordElement,
    _Tableau,
    clifford_to_circuit,
    is_clifford_circuit,
    random_clifford,
)
from zerofid.rbfold.fit import DecayPoint, summarize_point
from zerofid.seeding import child_seed, derive_rng


@dataclass(frozen=True)
class RBSequence:
    n_qubits: int
    length_m: int
    elements: tuple[CliffordElement, ...]
    inverse_element: CliffordElement
    interleave_target: Circuit | None = None

    def circuit(self) -> Circuit:
        """Physical gate sequence: compiled Cliffords, targets and the inversion."""
        gates = []
        for c in self.elements:
            gates.extend(clifford_to_circuit(c).gates)
            if self.interleave_target is not None:
                gates.extend(self.interleave_target.gates)
        gates.extend(clifford_to_circuit(self.inverse_element).gates)
        return Circuit(self.n_qubits, tuple(gates))


def rb_sequence(n_qubits: int, m: int, rng: np.random.Generator,
                interleave_target: Circuit | None = None) -> RBSequence:
    if not 1 <= n_qubits <= MAX_CLIFFORD_QUBITS:
        raise UnsupportedError(f"RB supports 1 to {MAX_CLIFFORD_QUBITS} qubits, got {n_qubits}")
    if m < 1:
        raise InvalidArgumentError(f"sequence length must be >= 1, got {m}")
    if interleave_target is not None:
        if interleave_target.n_qubits != n_qubits:
            raise InvalidArgumentError("interleave target acts on a different qubit count")
        if not is_clifford_circuit(interleave_target):
            raise UnsupportedError("interleave target must be a Clifford circuit")
    elements = tuple(random_clifford(n_qubits, rng) for _ in range(m))
    word = _Tableau.from_element(CliffordElement.identity(n_qubits))
    for c in elements:
        for g in clifford_to_circuit(c).gates:
            word.apply(g)
        if interleave_target is not None:
            for g in interleave_target.gates:
                word.apply(g)
    inv = CliffordElement.from_circuit(clifford_to_circuit(word.freeze()).adjoint())
    return RBSequence(n_qubits, m, elements, inv, interleave_target)


@lru_cache(maxsize=None)
def _identity_table(n_qubits: int) -> np.ndarray:
    t = pauli_expectations(sic_stack(n_qubits))
    t.setflags(write=False)
    return t


def sequence_zero_fidelity(seq: RBSequence, noise: NoiseModel | None, shots: int | None,
                           rng: np.random.Generator | None = None, *,
                           prep_rng: np.random.Generator | None = None,
                           shot_rng: np.random.Generator | None = None) -> float:
    """Normalized zero-fidelity of one sequence (``shots=None`` for exact expectations).

    ``rng`` seeds both the preparation-error and shot streams; pass
    ``prep_rng`` / ``shot_rng`` to control them separately.
    """
    n = seq.n_qubits
    if rng is not None:
        base = child_seed(rng)
        prep_rng = prep_rng or derive_rng(base, "prep")
        shot_rng = shot_rng or derive_rng(base, "shots")
    state = prepare_state(n, noise, prep_rng, "pauli")
    state = advance(state, seq.circuit(), noise, "pauli")
    table = read_out(state, noise, "pauli", shots=shots, shot_rng=shot_rng)
    return zero_fidelity_from_tables(_identity_table(n), table, estimated=shots is not None).normalized


def rb_experiment(n_qubits: int, m_grid: Sequence[int], L_sequences: int,
                  noise: NoiseModel | None, shots: int | None, rng: np.random.Generator, *,
                  interleave_target: Circuit | None = None, workers: int = 1) -> list[DecayPoint]:
    """Average sequence zero-fidelity for each length in ``m_grid`` (rows sorted by ``m``)."""
    if not m_grid:
        raise InvalidArgumentError("m_grid must not be empty")
    if L_sequences < 1:
        raise InvalidArgumentError("L_sequences must be >= 1")
    grid = sorted(set(int(m) for m in m_grid))
    base = child_seed(rng)
    return rb_experiment_from_seed(n_qubits, grid, L_sequences, noise, shots, base,
                                   interleave_target=interleave_target, workers=workers)


def rb_experiment_from_seed(n_qubits: int, m_grid: Sequence[int], L_sequences: int,
                            noise: NoiseModel | None, shots: int | None, base_seed: int, *,
                            interleave_target: Circuit | None = None,
                            workers: int = 1) -> list[DecayPoint]:
    tasks = [(m, l) for m in m_grid for l in range(L_sequences)]

    def run(task):
        m, l = task
        seq = rb_sequence(n_qubits, m, derive_rng(base_seed, "rb-seq", m, l), interleave_target)
        return sequence_zero_fidelity(seq, noise, shots,
                                      prep_rng=derive_rng(base_seed, "prep", l),
                                      shot_rng=derive_rng(base_seed, "shots", m, l))

    values = ordered_map(run, tasks, workers)
    out = []
    for i, m in enumerate(m_grid):
        out.append(summarize_point(m, values[i * L_sequences:(i + 1) * L_sequences]))
    return out
