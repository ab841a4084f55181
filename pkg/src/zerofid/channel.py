"""CPTP channels in Kraus and superoperator form, composition and twirling.

The superoperator follows the column-stacking ``vec`` of :mod:`zerofid.qstate`:
``vec(L(rho)) = S vec(rho)`` with ``S = sum_k conj(A_k) kron A_k``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from zerofid.errors import InvalidArgumentError
from zerofid.qstate import (
    DensityMatrix,
    PauliString,
    _check_n,
    pauli_basis,
    qubit_count,
    unvec,
    vec,
)
from zerofid.seeding import child_seed, derive_rng

UNITARY_TOL = 1e-9
TP_TOL = 1e-9
CHOI_TOL = 1e-9


def _superop_from_kraus(kraus: Sequence[np.ndarray]) -> np.ndarray:
    return sum(np.kron(a.conj(), a) for a in kraus)


def _choi_from_superop(superop: np.ndarray) -> np.ndarray:
    d = qubit_dim(superop)
    # superop[a + b d, i + j d] = L(|i><j|)[a, b];  choi[(i, a), (j, b)]
    s4 = superop.reshape(d, d, d, d)  # [b, a, j, i]
    return s4.transpose(3, 1, 2, 0).reshape(d * d, d * d)


def qubit_dim(superop: np.ndarray) -> int:
    d = int(round(np.sqrt(superop.shape[0])))
    if superop.shape != (d * d, d * d):
        raise InvalidArgumentError(f"superoperator shape {superop.shape} is not (d^2, d^2)")
    return d


@dataclass(frozen=True, eq=False)
class Channel:
    """A CPTP map on ``n_qubits`` qubits.

    Build instances with :meth:`from_kraus` or :meth:`from_superoperator`
    (or the constructors below); the missing representation is derived on
    first access. Kraus operators derived from a superoperator come from the
    eigendecomposition of the Choi matrix.
    """

    n_qubits: int
    superoperator: np.ndarray = field(repr=False)
    _kraus: tuple[np.ndarray, ...] | None = field(default=None, repr=False)

    @classmethod
    def from_kraus(cls, kraus: Sequence[np.ndarray], check: bool = True) -> "Channel":
        ops = tuple(np.array(a, dtype=complex) for a in kraus)
        if not ops:
            raise InvalidArgumentError("a channel needs at least one Kraus operator")
        d = ops[0].shape[0]
        n = qubit_count(d)
        if any(a.shape != (d, d) for a in ops):
            raise InvalidArgumentError("Kraus operators must all be square of equal size")
        if check:
            gram = sum(a.conj().T @ a for a in ops)
            if np.max(np.abs(gram - np.eye(d))) > TP_TOL:
                raise InvalidArgumentError("Kraus operators are not trace preserving")
        for a in ops:
            a.setflags(write=False)
        s = _superop_from_kraus(ops)
        s.setflags(write=False)
        return cls(n, s, ops)

    @classmethod
    def from_superoperator(cls, superop: np.ndarray) -> "Channel":
        s = np.array(superop, dtype=complex)
        d = qubit_dim(s)
        s.setflags(write=False)
        return cls(qubit_count(d), s, None)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @cached_property
    def kraus(self) -> tuple[np.ndarray, ...]:
        if self._kraus is not None:
            return self._kraus
        w, v = np.linalg.eigh(self.choi)
        d = self.dim
        ops = []
        for lam, vecv in zip(w[::-1], v.T[::-1]):
            if lam <= CHOI_TOL * max(1.0, w[-1]):
                break
            a = np.sqrt(lam) * vecv.reshape(d, d).T
            a.setflags(write=False)
            ops.append(a)
        return tuple(ops)

    @cached_property
    def choi(self) -> np.ndarray:
        return _choi_from_superop(self.superoperator)

    def ptm(self) -> np.ndarray:
        """Pauli transfer matrix ``R_ij = Tr[P_i L(P_j)] / 2**n``."""
        paulis = pauli_basis(self.n_qubits)
        basis = np.stack([vec(p.matrix) for p in paulis], axis=1)
        return np.real(basis.conj().T @ self.superoperator @ basis) / self.dim

    def __call__(self, rho):
        return apply(self, rho)


def is_trace_preserving(c: Channel, tol: float = TP_TOL) -> bool:
    gram = sum(a.conj().T @ a for a in c.kraus)
    return bool(np.max(np.abs(gram - np.eye(c.dim))) <= tol)


def is_completely_positive(c: Channel, tol: float = CHOI_TOL) -> bool:
    choi = c.choi
    choi = (choi + choi.conj().T) / 2
    return bool(np.linalg.eigvalsh(choi).min() >= -tol)


def identity_channel(n_qubits: int) -> Channel:
    _check_n(n_qubits)
    return Channel.from_kraus([np.eye(2**n_qubits)])


def unitary_channel(u) -> Channel:
    """``rho -> U rho U^dagger``."""
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise InvalidArgumentError(f"unitary must be square, got shape {u.shape}")
    if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) > UNITARY_TOL:
        raise InvalidArgumentError("matrix is not unitary")
    return Channel.from_kraus([u], check=False)


def depolarizing(lam: float, n_qubits: int, targets: Sequence[int] | None = None) -> Channel:
    """``E(rho) = (1 - lam) rho + lam Tr[rho] I / 2**n``.

    With ``targets`` the map acts on that subset of an ``n_qubits`` register
    (identity elsewhere): the targets are replaced by the maximally mixed
    state with probability ``lam``. Kraus operators are weighted Pauli strings.
    """
    _check_n(n_qubits)
    if not 0 <= lam <= 1:
        raise InvalidArgumentError(f"depolarizing parameter must be in [0, 1], got {lam}")
    targets = tuple(range(n_qubits)) if targets is None else tuple(targets)
    if len(set(targets)) != len(targets) or any(not 0 <= t < n_qubits for t in targets):
        raise InvalidArgumentError(f"invalid targets {targets} for {n_qubits} qubits")
    k = len(targets)
    local = pauli_basis(k)
    weight_rest = lam / 4**k
    kraus = []
    for p in local:
        label = ["I"] * n_qubits
        for t, c in zip(targets, p.label):
            label[t] = c
        mat = PauliString("".join(label)).matrix
        w = 1 - lam + weight_rest if p.is_identity() else weight_rest
        if w > 0:
            kraus.append(np.sqrt(w) * mat)
    return Channel.from_kraus(kraus)


def _check_same(a: Channel, b: Channel) -> None:
    if a.n_qubits != b.n_qubits:
        raise InvalidArgumentError(f"qubit count mismatch: {a.n_qubits} vs {b.n_qubits}")


def compose(a: Channel, b: Channel) -> Channel:
    """``a`` after ``b``: superoperator ``S_a @ S_b``."""
    _check_same(a, b)
    return Channel.from_superoperator(a.superoperator @ b.superoperator)


def compose_all(channels: Sequence[Channel]) -> Channel:
    """Apply ``channels`` in the given time order (first element first)."""
    if not channels:
        raise InvalidArgumentError("need at least one channel")
    out = channels[0].superoperator
    for c in channels[1:]:
        _check_same(channels[0], c)
        out = c.superoperator @ out
    return Channel.from_superoperator(out)


def power(c: Channel, m: int) -> Channel:
    if m < 0:
        raise InvalidArgumentError(f"power must be non-negative, got {m}")
    return Channel.from_superoperator(np.linalg.matrix_power(c.superoperator, m))


def adjoint_unitary_channel(c: Channel) -> Channel:
    if len(c.kraus) != 1:
        raise InvalidArgumentError("only single-Kraus channels have a unitary inverse")
    return unitary_channel(c.kraus[0].conj().T)


def apply(c: Channel, rho) -> DensityMatrix:
    """Apply ``c`` to a density matrix through the superoperator."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if m.shape != (c.dim, c.dim):
        raise InvalidArgumentError(f"state of shape {m.shape} on a {c.n_qubits}-qubit channel")
    out = unvec(c.superoperator @ vec(m))
    return DensityMatrix((out + out.conj().T) / 2)


def apply_kraus(c: Channel, rho) -> np.ndarray:
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    return sum(a @ m @ a.conj().T for a in c.kraus)


def apply_operator(c: Channel, op: np.ndarray) -> np.ndarray:
    """Linear extension of the channel to an arbitrary operator (e.g. a Pauli)."""
    return unvec(c.superoperator @ vec(np.asarray(op)))


def depolarizing_superoperator(p: float, n_qubits: int) -> np.ndarray:
    """Superoperator of ``rho -> p rho + (1 - p) Tr[rho] I / D``."""
    d = 2**n_qubits
    ident = vec(np.eye(d))
    return p * np.eye(d * d) + (1 - p) * np.outer(ident, ident) / d


def depolarizing_parameter(c: Channel) -> float:
    """``p = (Tr[S] - 1) / (D^2 - 1)``, the strength of the twirled channel."""
    d2 = c.dim**2
    return float((np.real(np.trace(c.superoperator)) - 1) / (d2 - 1))


def average_gate_fidelity(c: Channel) -> float:
    p = depolarizing_parameter(c)
    return p + (1 - p) / c.dim


@dataclass(frozen=True)
class TwirlReport:
    """Result of a sampled twirl.

    ``p_empirical`` is the mean contraction of the all-Z probe,
    ``Tr[Z L_C(Z)] / D`` over the sampled twirl elements ``C``; for a perfect
    twirl it equals ``p_formula``.
    """

    p_empirical: float
    p_empirical_stderr: float
    p_formula: float
    max_deviation_from_depolarizing: float
    n_samples: int


def twirl_estimate(c: Channel, n_samples: int, rng: np.random.Generator,
                   ensemble: str = "clifford") -> TwirlReport:
    """Average ``U^dagger L(U . U^dagger) U`` over random ``U``.

    ``ensemble`` is ``"clifford"`` (uniform over the Clifford group, n <= 3)
    or ``"haar"``. Sample ``i`` draws from its own derived stream, and the
    running sum is accumulated in sample order.
    """
    if n_samples < 1:
        raise InvalidArgumentError("n_samples must be >= 1")
    if ensemble not in ("clifford", "haar"):
        raise InvalidArgumentError(f"unknown twirl ensemble {ensemble!r}")
    n, d = c.n_qubits, c.dim
    base = child_seed(rng)
    zprobe = vec(np.diag([(-1) ** bin(i).count("1") for i in range(d)]).astype(complex))
    acc = np.zeros_like(c.superoperator)
    probes = np.empty(n_samples)
    for i in range(n_samples):
        u = _twirl_unitary(n, ensemble, derive_rng(base, "twirl", i))
        su = np.kron(u.conj(), u)
        t = su.conj().T @ c.superoperator @ su
        acc += t
        probes[i] = np.real(zprobe.conj() @ t @ zprobe) / d
    avg = acc / n_samples
    p_formula = depolarizing_parameter(c)
    dev = np.max(np.abs(avg - depolarizing_superoperator(p_formula, n)))
    stderr = probes.std(ddof=1) / np.sqrt(n_samples) if n_samples > 1 else float("nan")
    return TwirlReport(float(probes.mean()), float(stderr), p_formula, float(dev), n_samples)


def _twirl_unitary(n: int, ensemble: str, rng: np.random.Generator) -> np.ndarray:
    if ensemble == "haar":
        from scipy.stats import unitary_group

        return unitary_group.rvs(2**n, random_state=rng)
    from zerofid.rbfold.clifford import clifford_to_unitary, random_clifford

    return clifford_to_unitary(random_clifford(n, rng))
