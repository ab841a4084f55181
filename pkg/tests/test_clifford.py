from __future__ import annotations

from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zerofid.circuit import Circuit, Gate
from zerofid.errors import InvalidArgumentError
from zerofid.qstate import PauliString, pauli_labels
from zerofid.rbfold.clifford import (
    CliffordElement,
    clifford_group_order,
    clifford_to_circuit,
    clifford_to_unitary,
    compose,
    enumerate_clifford_group,
    inverse,
    is_clifford_circuit,
    random_clifford,
)


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float = 1e-9) -> bool:
    k = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    phase = a[k] / b[k]
    return abs(abs(phase) - 1) < atol and np.allclose(a, phase * b, atol=atol)


def test_group_orders():
    assert [clifford_group_order(n) for n in (1, 2, 3)] == [24, 11520, 92897280]


def test_single_qubit_enumeration_has_24_elements():
    assert len(enumerate_clifford_group(1)) == 24


@pytest.mark.slow
def test_two_qubit_enumeration_has_11520_elements():
    assert len(enumerate_clifford_group(2)) == 11520


def test_identity_synthesizes_to_empty_circuit():
    for n in (1, 2, 3):
        assert len(clifford_to_circuit(CliffordElement.identity(n))) == 0


def test_hadamard_tableau():
    h = CliffordElement.from_circuit(Circuit(1, (Gate("H", (0,)),)))
    assert h.image("X") == (1, "Z")
    assert h.image("Z") == (1, "X")
    assert h.image("Y") == (-1, "Y")


def test_s_and_cnot_images():
    s = CliffordElement.from_circuit(Circuit(1, (Gate("S", (0,)),)))
    assert s.image("X") == (1, "Y")
    cx = CliffordElement.from_circuit(Circuit(2, (Gate("CNOT", (0, 1)),)))
    assert cx.image("XI") == (1, "XX")
    assert cx.image("IZ") == (1, "ZZ")


@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_images_match_unitary_conjugation(seed, n):
    c = random_clifford(n, np.random.default_rng(seed))
    u = clifford_to_unitary(c)
    for label in pauli_labels(n)[1:8]:
        sign, img = c.image(label)
        p = PauliString(label).matrix
        np.testing.assert_allclose(u @ p @ u.conj().T, sign * PauliString(img).matrix, atol=1e-10)


@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_random_elements_are_symplectic_and_round_trip(seed, n):
    c = random_clifford(n, np.random.default_rng(seed))
    assert c.is_symplectic()
    assert CliffordElement.from_circuit(clifford_to_circuit(c)) == c


@pytest.mark.parametrize("n", [1, 2, 3])
def test_compose_matches_matrix_product(n):
    r = np.random.default_rng(n)
    for _ in range(500 if n < 3 else 150):
        a, b = random_clifford(n, r), random_clifford(n, r)
        assert equal_up_to_phase(clifford_to_unitary(compose(a, b)),
                                 clifford_to_unitary(a) @ clifford_to_unitary(b))


@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_inverse(seed, n):
    c = random_clifford(n, np.random.default_rng(seed))
    assert compose(c, inverse(c)) == CliffordElement.identity(n)
    assert compose(inverse(c), c) == CliffordElement.identity(n)


def test_synthesized_circuits_use_clifford_gates():
    r = np.random.default_rng(0)
    for _ in range(50):
        assert is_clifford_circuit(clifford_to_circuit(random_clifford(3, r)))
    assert not is_clifford_circuit(Circuit(1, (Gate("U3", (0,), (0.1, 0, 0)),)))


@pytest.mark.slow
def test_single_qubit_sampler_is_uniform():
    r = np.random.default_rng(2024)
    draws = 24 * 10**4
    counts = Counter(random_clifford(1, r) for _ in range(draws))
    assert len(counts) == 24
    mean, sd = draws / 24, np.sqrt(draws * (1 / 24) * (23 / 24))
    assert all(abs(c - mean) < 5 * sd for c in counts.values())


def test_two_qubit_sampler_hits_many_cosets():
    r = np.random.default_rng(3)
    draws = [random_clifford(2, r) for _ in range(3000)]
    # birthday bound: 3000 uniform draws from 11520 elements leave ~2600 distinct
    distinct = len(set(draws))
    assert 2450 < distinct < 2750


def test_three_qubit_sign_bits_balanced():
    r = np.random.default_rng(4)
    signs = np.array([random_clifford(3, r).r for _ in range(2000)])
    assert np.all(np.abs(signs.mean(axis=0) - 0.5) < 0.05)


def test_unsupported_sizes():
    with pytest.raises(Exception):
        random_clifford(4, np.random.default_rng(0))
    with pytest.raises(InvalidArgumentError):
        CliffordElement.identity(1).image("XX")
