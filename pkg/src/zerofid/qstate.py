"""Dense states, Pauli strings, SIC states and vectorization.

Conventions used throughout the package:

* qubit 0 is the leftmost tensor factor (most significant bit of a basis
  index) and the first character of Pauli labels and bitstrings;
* Pauli strings are *unnormalized*, ``Tr[P P] = 2**n``;
* ``vec`` stacks columns, so ``vec(A B C) = (C^T kron A) vec(B)``.

Besides the single-state API, this module hosts the batched kernels used by
the simulators: they act on stacks of density matrices of shape
``(S, 2**n, 2**n)`` and touch only the qubits an operation acts on.
"""
from __future__ import annotations

import itertools
import string
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from zerofid.errors import InvalidArgumentError

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9
MAX_QUBITS = 8

PAULI_LETTERS = "IXYZ"
PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
# (4, 2, 2) stack in IXYZ order
_PAULI_STACK = np.stack([PAULI_MATRICES[c] for c in PAULI_LETTERS])

# Single-qubit SIC kets |psi_1..4>, a regular tetrahedron on the Bloch sphere.
_A = 1 / np.sqrt(3)
_B = np.sqrt(2 / 3)
SIC_KETS = np.array([
    [1.0, 0.0],
    [_A, _B],
    [_A, _B * np.exp(2j * np.pi / 3)],
    [_A, _B * np.exp(4j * np.pi / 3)],
], dtype=complex)


def _check_n(n_qubits: int) -> None:
    if not isinstance(n_qubits, (int, np.integer)) or n_qubits < 1:
        raise InvalidArgumentError(f"n_qubits must be a positive integer, got {n_qubits!r}")
    if n_qubits > MAX_QUBITS:
        raise InvalidArgumentError(f"at most {MAX_QUBITS} qubits are supported, got {n_qubits}")


def qubit_count(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 2 or 1 << n != dim:
        raise InvalidArgumentError(f"dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated ``2**n x 2**n`` density matrix.

    Construction checks Hermiticity (``1e-10``), unit trace (``1e-10``) and
    positivity (eigenvalues above ``-1e-9``). The wrapped array is made
    read-only.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidArgumentError(f"density matrix must be square, got shape {m.shape}")
        qubit_count(m.shape[0])
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise InvalidArgumentError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1) > TRACE_TOL:
            raise InvalidArgumentError(f"density matrix trace is {np.trace(m).real:.3g}, not 1")
        if np.linalg.eigvalsh(m).min() < -PSD_TOL:
            raise InvalidArgumentError("density matrix is not positive semidefinite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_ket(cls, ket: Sequence[complex]) -> "DensityMatrix":
        psi = np.asarray(ket, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def basis(cls, index: int, n_qubits: int) -> "DensityMatrix":
        ket = np.zeros(2**n_qubits, dtype=complex)
        ket[index] = 1
        return cls.from_ket(ket)

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "DensityMatrix":
        d = 2**n_qubits
        return cls(np.eye(d, dtype=complex) / d)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return qubit_count(self.dim)

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def bloch_vector(self) -> np.ndarray:
        """(<X>, <Y>, <Z>) of a single-qubit state."""
        if self.n_qubits != 1:
            raise InvalidArgumentError("Bloch vectors are defined for one qubit only")
        return np.array([np.real(np.trace(self.matrix @ PAULI_MATRICES[c])) for c in "XYZ"])


@lru_cache(maxsize=None)
def _pauli_matrix(label: str) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for c in label:
        out = np.kron(out, PAULI_MATRICES[c])
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Paulis, e.g. ``PauliString("XIZ")``."""

    label: str

    def __post_init__(self):
        if not self.label or any(c not in PAULI_LETTERS for c in self.label):
            raise InvalidArgumentError(f"invalid Pauli label {self.label!r}")

    @property
    def n_qubits(self) -> int:
        return len(self.label)

    @property
    def matrix(self) -> np.ndarray:
        return _pauli_matrix(self.label)

    @property
    def index(self) -> int:
        """Position in the lexicographic :func:`pauli_basis` ordering."""
        return int("".join(str(PAULI_LETTERS.index(c)) for c in self.label), 4)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(k for k, c in enumerate(self.label) if c != "I")

    def is_identity(self) -> bool:
        return not self.support

    def __str__(self) -> str:
        return self.label


def pauli_labels(n_qubits: int) -> list[str]:
    _check_n(n_qubits)
    return ["".join(p) for p in itertools.product(PAULI_LETTERS, repeat=n_qubits)]


def pauli_basis(n_qubits: int) -> list[PauliString]:
    """All ``4**n`` Pauli strings in lexicographic IXYZ order (index 0 is identity)."""
    return [PauliString(label) for label in pauli_labels(n_qubits)]


def sic_kets(n_qubits: int) -> np.ndarray:
    """``(4**n, 2**n)`` array of product SIC kets in lexicographic index order."""
    _check_n(n_qubits)
    kets = SIC_KETS
    for _ in range(n_qubits - 1):
        kets = np.einsum("ia,jb->ijab", kets, SIC_KETS).reshape(kets.shape[0] * 4, -1)
    return kets


def sic_stack(n_qubits: int) -> np.ndarray:
    kets = sic_kets(n_qubits)
    return np.einsum("sa,sb->sab", kets, kets.conj())


def sic_states(n_qubits: int) -> list[DensityMatrix]:
    """All ``4**n`` tensor products of the four single-qubit SIC states.

    State ``i`` has base-4 digits ``(i_0, ..., i_{n-1})`` selecting the SIC
    state of each qubit, qubit 0 first.
    """
    return [DensityMatrix(rho) for rho in sic_stack(n_qubits)]


def sic_index_digits(index: int, n_qubits: int) -> tuple[int, ...]:
    if not 0 <= index < 4**n_qubits:
        raise InvalidArgumentError(f"SIC index {index} out of range for {n_qubits} qubits")
    return tuple(int(c) for c in np.base_repr(index, 4).rjust(n_qubits, "0"))


def _as_matrix(a) -> np.ndarray:
    if isinstance(a, DensityMatrix):
        return a.matrix
    if isinstance(a, PauliString):
        return a.matrix
    return np.asarray(a)


def vec(matrix) -> np.ndarray:
    """Column-stacking vectorization of a square matrix."""
    m = _as_matrix(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidArgumentError(f"vec expects a square matrix, got shape {m.shape}")
    return m.reshape(-1, order="F")


def unvec(vector) -> np.ndarray:
    v = np.asarray(vector).reshape(-1)
    dim = int(round(np.sqrt(v.size)))
    if dim * dim != v.size:
        raise InvalidArgumentError(f"length {v.size} is not a perfect square")
    return v.reshape((dim, dim), order="F")


def hs_inner(a, b) -> complex:
    """Hilbert-Schmidt inner product ``Tr[A^dagger B]``."""
    a, b = _as_matrix(a), _as_matrix(b)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"shape mismatch {a.shape} vs {b.shape}")
    return complex(np.sum(a.conj() * b))


def expectation(rho, pauli: PauliString | str) -> float:
    """``Tr[rho W]`` for a Pauli string ``W``."""
    if isinstance(pauli, str):
        pauli = PauliString(pauli)
    m = _as_matrix(rho)
    if m.shape[0] != 2**pauli.n_qubits:
        raise InvalidArgumentError(
            f"state on {qubit_count(m.shape[0])} qubits, Pauli on {pauli.n_qubits}")
    if pauli.is_identity():
        return float(np.real(np.trace(m)))
    return float(np.real(np.sum(m.T * pauli.matrix)))


# ---------------------------------------------------------------------------
# Batched kernels on stacks of density matrices, shape (S, D, D).
# ---------------------------------------------------------------------------

_LETTERS = string.ascii_letters


def _stack_subscripts(n: int) -> tuple[str, str]:
    return _LETTERS[:n], _LETTERS[n:2 * n]


def pauli_expectations(rhos: np.ndarray) -> np.ndarray:
    """``Tr[rho W_j]`` for every state in the stack and every Pauli string.

    Returns a real array of shape ``(S, 4**n)`` in :func:`pauli_basis` order.
    """
    rhos = np.asarray(rhos)
    single = rhos.ndim == 2
    if single:
        rhos = rhos[None]
    s, d = rhos.shape[0], rhos.shape[1]
    n = qubit_count(d)
    x = rhos.reshape((s,) + (2,) * (2 * n))
    perm = [0] + [ax for k in range(n) for ax in (1 + k, 1 + n + k)]
    x = x.transpose(perm).reshape((s,) + (4,) * n)
    # M[a, 2r + c] = sigma_a[c, r], so sum_{r,c} rho[r, c] sigma_a[c, r] = Tr[rho sigma_a]
    m = _PAULI_STACK.transpose(0, 2, 1).reshape(4, 4)
    for k in range(n):
        x = np.moveaxis(np.tensordot(m, x, axes=([1], [k + 1])), 0, k + 1)
    out = x.reshape(s, 4**n).real
    return out[0] if single else out


def apply_unitary(rhos: np.ndarray, u: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """``U rho U^dagger`` with ``U`` acting on ``targets`` (in order) of every state."""
    s, d = rhos.shape[0], rhos.shape[1]
    n = qubit_count(d)
    k = len(targets)
    ut = u.reshape((2,) * (2 * k))
    old = list(range(k, 2 * k))
    row_axes = [1 + t for t in targets]
    col_axes = [1 + n + t for t in targets]
    x = rhos.reshape((s,) + (2,) * (2 * n))
    x = np.moveaxis(np.tensordot(ut, x, axes=(old, row_axes)), list(range(k)), row_axes)
    x = np.moveaxis(np.tensordot(ut.conj(), x, axes=(old, col_axes)), list(range(k)), col_axes)
    return x.reshape(s, d, d)


def apply_diagonal_unitary(rhos: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """``U rho U^dagger`` for ``U = diag(phases)`` on the full register."""
    return rhos * phases[None, :, None] * phases.conj()[None, None, :]


def apply_local_depolarizing(rhos: np.ndarray, lam: float, targets: Sequence[int]) -> np.ndarray:
    """``(1 - lam) rho + lam Tr_T[rho] (x) I_T / 2**k`` on target qubits ``T``."""
    if lam == 0:
        return rhos
    s, d = rhos.shape[0], rhos.shape[1]
    n = qubit_count(d)
    rows, cols = _stack_subscripts(n)
    traced_cols = "".join(rows[q] if q in targets else cols[q] for q in range(n))
    keep_r = "".join(rows[q] for q in range(n) if q not in targets)
    keep_c = "".join(cols[q] for q in range(n) if q not in targets)
    x = rhos.reshape((s,) + (2,) * (2 * n))
    reduced = np.einsum(f"Z{rows}{traced_cols}->Z{keep_r}{keep_c}", x)
    eyes = ",".join(rows[t] + cols[t] for t in targets)
    eye = np.eye(2)
    mixed = np.einsum(f"Z{keep_r}{keep_c},{eyes}->Z{rows}{cols}",
                      reduced, *([eye] * len(targets))) / 2 ** len(targets)
    return ((1 - lam) * x + lam * mixed).reshape(s, d, d)


def product_kets(single_kets: np.ndarray) -> np.ndarray:
    """Tensor products of per-qubit kets.

    ``single_kets`` has shape ``(S, n, 2)``; the result has shape ``(S, 2**n)``.
    """
    out = single_kets[:, 0, :]
    for k in range(1, single_kets.shape[1]):
        out = np.einsum("sa,sb->sab", out, single_kets[:, k, :]).reshape(out.shape[0], -1)
    return out
