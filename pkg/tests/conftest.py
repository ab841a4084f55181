from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings
from scipy.stats import unitary_group

settings.register_profile("default", max_examples=30, deadline=None)
settings.load_profile("default")


def random_density(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    return unitary_group.rvs(dim, random_state=rng)


def random_kraus(dim: int, rank: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Random CPTP Kraus set from a Haar isometry."""
    v = unitary_group.rvs(dim * rank, random_state=rng)[:, :dim]
    return [v[k * dim:(k + 1) * dim] for k in range(rank)]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
