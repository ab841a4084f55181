from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_density, random_unitary
from zerofid.errors import InvalidArgumentError
from zerofid.qstate import (
    DensityMatrix,
    PauliString,
    apply_local_depolarizing,
    apply_unitary,
    expectation,
    hs_inner,
    pauli_basis,
    pauli_expectations,
    sic_states,
    unvec,
    vec,
)


def test_sic_pairwise_overlap_is_one_third():
    kets = [np.linalg.eigh(s.matrix)[1][:, -1] for s in sic_states(1)]
    for i, j in itertools.product(range(4), repeat=2):
        overlap = abs(np.vdot(kets[i], kets[j])) ** 2
        assert overlap == pytest.approx(1.0 if i == j else 1 / 3, abs=1e-12)


def test_sic_bloch_vectors_form_tetrahedron():
    blochs = np.array([s.bloch_vector() for s in sic_states(1)])
    np.testing.assert_allclose(blochs.sum(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(blochs, axis=1), 1, atol=1e-12)
    # second state, from its amplitudes (1/sqrt3, sqrt(2/3))
    np.testing.assert_allclose(blochs[1], [2 * np.sqrt(2) / 3, 0, -1 / 3], atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_sic_product_count_and_validity(n):
    states = sic_states(n)
    assert len(states) == 4**n
    assert all(s.purity() == pytest.approx(1) for s in states)


def test_pauli_basis_order():
    assert [str(p) for p in pauli_basis(1)] == ["I", "X", "Y", "Z"]
    two = pauli_basis(2)
    assert len(two) == 16 and str(two[0]) == "II" and str(two[-1]) == "ZZ"
    assert [p.index for p in two] == list(range(16))


@pytest.mark.parametrize("n", [1, 2])
def test_pauli_orthogonality(n):
    mats = [p.matrix for p in pauli_basis(n)]
    gram = np.array([[np.trace(a @ b) for b in mats] for a in mats])
    np.testing.assert_allclose(gram, 2**n * np.eye(4**n), atol=1e-12)
    for m in mats:
        np.testing.assert_allclose(m, m.conj().T)
        np.testing.assert_allclose(m @ m, np.eye(2**n), atol=1e-12)


def test_pauli_rejects_bad_label():
    with pytest.raises(InvalidArgumentError):
        PauliString("XQ")


def test_vec_column_stacking():
    np.testing.assert_array_equal(vec(np.array([[1, 2], [3, 4]])), [1, 3, 2, 4])
    np.testing.assert_array_equal(vec(np.eye(2)), [1, 0, 0, 1])


def test_vec_abc_identity(rng):
    a, b, c = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(3))
    np.testing.assert_allclose(vec(a @ b @ c), np.kron(c.T, a) @ vec(b), atol=1e-12)


@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_unvec_inverts_vec(dim, seed):
    r = np.random.default_rng(seed)
    m = r.normal(size=(dim, dim)) + 1j * r.normal(size=(dim, dim))
    np.testing.assert_array_equal(unvec(vec(m)), m)


def test_unvec_rejects_non_square_length():
    with pytest.raises(InvalidArgumentError):
        unvec(np.ones(5))


def test_hs_inner_values(rng):
    x, z = PauliString("X"), PauliString("Z")
    assert hs_inner(x, x) == pytest.approx(2)
    assert hs_inner(x, z) == pytest.approx(0)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    assert hs_inner(a, b) == pytest.approx(np.trace(a.conj().T @ b), abs=1e-12)
    assert hs_inner(a, b) == pytest.approx(np.vdot(vec(a), vec(b)), abs=1e-12)


def test_expectation_values():
    zero = DensityMatrix.basis(0, 1)
    assert expectation(zero, "Z") == pytest.approx(1)
    assert expectation(sic_states(1)[1], "Z") == pytest.approx(-1 / 3)
    mixed = DensityMatrix.maximally_mixed(2)
    for p in pauli_basis(2)[1:]:
        assert expectation(mixed, p) == pytest.approx(0, abs=1e-15)


@pytest.mark.parametrize("matrix, message", [
    (np.array([[1, 1], [0, 0]]), "Hermitian"),
    (np.eye(2), "trace"),
    (np.diag([1.5, -0.5]), "positive"),
    (np.eye(3) / 3, "power of two"),
])
def test_density_matrix_validation(matrix, message):
    with pytest.raises(InvalidArgumentError, match=message):
        DensityMatrix(matrix)


def test_pauli_expectations_table_matches_trace(rng):
    rhos = np.stack([random_density(4, rng) for _ in range(3)])
    table = pauli_expectations(rhos)
    for s, rho in enumerate(rhos):
        for j, p in enumerate(pauli_basis(2)):
            assert table[s, j] == pytest.approx(np.real(np.trace(rho @ p.matrix)), abs=1e-12)


@pytest.mark.parametrize("targets", [(0,), (2,), (0, 2), (2, 1)])
def test_apply_unitary_matches_full_matrix(targets, rng):
    n = 3
    rho = random_density(2**n, rng)
    u = random_unitary(2 ** len(targets), rng)
    full = _embed(u, targets, n)
    out = apply_unitary(rho[None], u, targets)[0]
    np.testing.assert_allclose(out, full @ rho @ full.conj().T, atol=1e-12)


def test_local_depolarizing_contracts_touched_paulis(rng):
    rho = random_density(4, rng)
    before = pauli_expectations(rho[None])[0]
    after = pauli_expectations(apply_local_depolarizing(rho[None], 0.2, (1,)))[0]
    for j, p in enumerate(pauli_basis(2)):
        factor = 0.8 if p.label[1] != "I" else 1.0
        assert after[j] == pytest.approx(factor * before[j], abs=1e-12)


def _embed(u, targets, n):
    """Brute-force embedding through basis-state action."""
    d = 2**n
    out = np.zeros((d, d), dtype=complex)
    k = len(targets)
    for col in range(d):
        bits = [(col >> (n - 1 - q)) & 1 for q in range(n)]
        local_in = int("".join(str(bits[t]) for t in targets), 2)
        for local_out in range(2**k):
            new = list(bits)
            for pos, t in enumerate(targets):
                new[t] = (local_out >> (k - 1 - pos)) & 1
            out[int("".join(map(str, new)), 2), col] += u[local_out, local_in]
    return out
