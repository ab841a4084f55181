"""Gate-level circuits, noise models and measurement simulation.

A noisy experiment has three stages:

1. preparation: each qubit is rotated from ``|0>`` to a SIC state by a U3
   gate, optionally followed by a random U3 rotation error;
2. the circuit body, where every gate is followed by a depolarizing channel
   on its own qubits whose strength depends on the gate arity;
3. measurement of a Pauli string: a basis change per qubit (X: H,
   Y: Sdg then H), a computational-basis readout, and independent classical
   bit flips given by per-qubit confusion matrices.

Preparation and basis-change gates are noiseless; SPAM enters only through
the rotation error and the confusion matrices.

Circuit text format (one gate per line, ``#`` starts a comment)::

    CZ 0 1
    H 2
    CNOT 0 2          # control first
    U3 1 0.1 0.2 0.3  # qubit, theta, phi, lambda (radians)
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from zerofid.errors import InvalidArgumentError
from zerofid.qstate import (
    PAULI_MATRICES,
    SIC_KETS,
    DensityMatrix,
    PauliString,
    _check_n,
    apply_diagonal_unitary,
    apply_local_depolarizing,
    apply_unitary,
    pauli_expectations,
    product_kets,
    sic_index_digits,
)

ONE_QUBIT_GATES = ("H", "S", "Sdg", "X", "Y", "Z", "U3")
TWO_QUBIT_GATES = ("CNOT", "CZ")
GATE_KINDS = ONE_QUBIT_GATES + TWO_QUBIT_GATES

WEAK_READOUT = np.array([[0.997, 0.003], [0.005, 0.995]])
STRONG_READOUT = np.array([[0.97, 0.03], [0.05, 0.95]])
PREP_SIGMA_DEGREES = math.sqrt(5)
DEFAULT_SHOTS = 1024

# SIC state k is U3(theta_k, phi_k, 0)|0>
_SIC_THETA = 2 * math.acos(1 / math.sqrt(3))
SIC_PREP_ANGLES = (
    (0.0, 0.0, 0.0),
    (_SIC_THETA, 0.0, 0.0),
    (_SIC_THETA, 2 * math.pi / 3, 0.0),
    (_SIC_THETA, 4 * math.pi / 3, 0.0),
)


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([
        [c, -np.exp(1j * lam) * s],
        [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
    ], dtype=complex)


def u3_matrices(angles: np.ndarray) -> np.ndarray:
    """Vectorized :func:`u3_matrix` over an ``(..., 3)`` array of angles."""
    theta, phi, lam = angles[..., 0], angles[..., 1], angles[..., 2]
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    out = np.empty(angles.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 0, 1] = -np.exp(1j * lam) * s
    out[..., 1, 0] = np.exp(1j * phi) * s
    out[..., 1, 1] = np.exp(1j * (phi + lam)) * c
    return out


_S2 = 1 / math.sqrt(2)
_FIXED = {
    "H": np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    "S": np.diag([1, 1j]).astype(complex),
    "Sdg": np.diag([1, -1j]).astype(complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
}
_DIAGONAL = {"S", "Sdg", "Z", "CZ"}
_ADJOINT = {"S": "Sdg", "Sdg": "S"}


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind not in GATE_KINDS:
            raise InvalidArgumentError(f"unknown gate kind {self.kind!r}")
        arity = 2 if self.kind in TWO_QUBIT_GATES else 1
        if len(self.targets) != arity:
            raise InvalidArgumentError(f"{self.kind} takes {arity} target(s), got {self.targets}")
        if len(set(self.targets)) != arity or min(self.targets) < 0:
            raise InvalidArgumentError(f"invalid targets {self.targets} for {self.kind}")
        if len(self.params) != (3 if self.kind == "U3" else 0):
            raise InvalidArgumentError(f"wrong parameter count for {self.kind}: {self.params}")

    @property
    def arity(self) -> int:
        return len(self.targets)

    @property
    def matrix(self) -> np.ndarray:
        if self.kind == "U3":
            return u3_matrix(*self.params)
        return _FIXED[self.kind]

    def adjoint(self) -> "Gate":
        if self.kind == "U3":
            theta, phi, lam = self.params
            return Gate("U3", self.targets, (-theta, -lam, -phi))
        return Gate(_ADJOINT.get(self.kind, self.kind), self.targets)

    def to_text(self) -> str:
        parts = [self.kind, *map(str, self.targets), *(repr(p) for p in self.params)]
        return " ".join(parts)


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        _check_n(self.n_qubits)
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if max(g.targets) >= self.n_qubits:
                raise InvalidArgumentError(
                    f"gate {g.to_text()!r} addresses a qubit outside a {self.n_qubits}-qubit register")

    def __len__(self) -> int:
        return len(self.gates)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise InvalidArgumentError("cannot concatenate circuits of different widths")
        return Circuit(self.n_qubits, self.gates + other.gates)

    def adjoint(self) -> "Circuit":
        return Circuit(self.n_qubits, tuple(g.adjoint() for g in reversed(self.gates)))

    def count(self, kind: str) -> int:
        return sum(g.kind == kind for g in self.gates)

    def unitary(self) -> np.ndarray:
        d = 2**self.n_qubits
        u = np.eye(d, dtype=complex)
        for g in self.gates:
            u = embed_operator(g.matrix, g.targets, self.n_qubits) @ u
        return u

    def to_text(self) -> str:
        return "".join(g.to_text() + "\n" for g in self.gates)

    @classmethod
    def from_text(cls, text: str, n_qubits: int | None = None) -> "Circuit":
        gates = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            kind, *rest = line.split()
            try:
                if kind == "U3":
                    targets, params = rest[:1], rest[1:]
                else:
                    targets, params = rest, []
                gates.append(Gate(kind, tuple(int(t) for t in targets),
                                  tuple(float(p) for p in params)))
            except (ValueError, InvalidArgumentError) as exc:
                raise InvalidArgumentError(f"line {lineno}: cannot parse {raw.strip()!r}: {exc}") from None
        if n_qubits is None:
            n_qubits = 1 + max((max(g.targets) for g in gates), default=0)
        return cls(n_qubits, tuple(gates))


def embed_operator(op: np.ndarray, targets: Sequence[int], n_qubits: int) -> np.ndarray:
    """Full-register matrix of a local operator acting on ``targets``."""
    d = 2**n_qubits
    k = len(targets)
    cols = np.eye(d, dtype=complex).reshape((d,) + (2,) * n_qubits)
    t = np.tensordot(op.reshape((2,) * (2 * k)), cols,
                     axes=(list(range(k, 2 * k)), [1 + q for q in targets]))
    t = np.moveaxis(t, list(range(k)), [1 + q for q in targets])
    return t.reshape(d, d).T


@lru_cache(maxsize=None)
def _diagonal_phases(kind: str, targets: tuple[int, ...], n_qubits: int) -> np.ndarray:
    diag = np.diag(_FIXED[kind])
    idx = np.arange(2**n_qubits)
    local = np.zeros_like(idx)
    for t in targets:
        local = 2 * local + ((idx >> (n_qubits - 1 - t)) & 1)
    return diag[local]


def _apply_gate(rhos: np.ndarray, gate: Gate, n_qubits: int) -> np.ndarray:
    if gate.kind in _DIAGONAL:
        return apply_diagonal_unitary(rhos, _diagonal_phases(gate.kind, gate.targets, n_qubits))
    return apply_unitary(rhos, gate.matrix, gate.targets)


def _confusion(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2):
        raise InvalidArgumentError(f"confusion matrix must be 2x2, got shape {m.shape}")
    if np.any(m < 0) or np.any(m > 1) or np.max(np.abs(m.sum(axis=1) - 1)) > 1e-12:
        raise InvalidArgumentError("confusion matrix must be row-stochastic with entries in [0, 1]")
    return m


@dataclass(frozen=True)
class NoiseModel:
    """Gate and SPAM noise.

    ``gate_depolarizing`` maps gate arity (1 or 2) to the strength of the
    depolarizing channel applied on a gate's qubits after the gate.
    ``readout`` is ``None``, one confusion matrix for every qubit, or a
    sequence of per-qubit matrices; row ``t`` gives the probabilities of
    reporting 0/1 when the true outcome is ``t``. ``prep_rotation_sigma``
    is the standard deviation in degrees of each U3 preparation-error angle.
    """

    gate_depolarizing: Mapping[int, float] = field(default_factory=dict)
    readout: object = None
    prep_rotation_sigma: float = 0.0

    def __post_init__(self):
        gd = {int(k): float(v) for k, v in dict(self.gate_depolarizing).items()}
        for arity, lam in gd.items():
            if arity not in (1, 2):
                raise InvalidArgumentError(f"gate arity must be 1 or 2, got {arity}")
            if not 0 <= lam <= 1:
                raise InvalidArgumentError(f"depolarizing strength must be in [0, 1], got {lam}")
        object.__setattr__(self, "gate_depolarizing", gd)
        if self.readout is not None:
            r = np.asarray(self.readout, dtype=float)
            if r.ndim == 2:
                r = _confusion(r)
            elif r.ndim == 3:
                r = np.stack([_confusion(m) for m in r])
            else:
                raise InvalidArgumentError("readout must be a 2x2 matrix or a stack of them")
            r.setflags(write=False)
            object.__setattr__(self, "readout", r)
        if self.prep_rotation_sigma < 0:
            raise InvalidArgumentError("prep_rotation_sigma must be non-negative")

    def gate_lambda(self, gate: Gate) -> float:
        return self.gate_depolarizing.get(gate.arity, 0.0)

    def readout_matrices(self, n_qubits: int) -> np.ndarray | None:
        if self.readout is None:
            return None
        if self.readout.ndim == 2:
            return np.broadcast_to(self.readout, (n_qubits, 2, 2))
        if self.readout.shape[0] != n_qubits:
            raise InvalidArgumentError(
                f"{self.readout.shape[0]} readout matrices for {n_qubits} qubits")
        return self.readout

    @property
    def has_spam(self) -> bool:
        return self.readout is not None or self.prep_rotation_sigma > 0

    def without_spam(self) -> "NoiseModel":
        return NoiseModel(self.gate_depolarizing)

    def to_dict(self) -> dict:
        return {
            "gate_depolarizing": {str(k): v for k, v in sorted(self.gate_depolarizing.items())},
            "readout": None if self.readout is None else self.readout.tolist(),
            "prep_rotation_sigma": self.prep_rotation_sigma,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "NoiseModel":
        return cls({int(k): v for k, v in dict(d.get("gate_depolarizing", {})).items()},
                   d.get("readout"), float(d.get("prep_rotation_sigma", 0.0)))


SPAM_LEVELS = ("none", "weak", "strong")


def spam_noise(level: str, gate_depolarizing: Mapping[int, float] | None = None) -> NoiseModel:
    """Noise model with one of the preset SPAM levels.

    ``"weak"`` and ``"strong"`` pair the corresponding readout matrix with
    Gaussian preparation rotations of standard deviation sqrt(5) degrees.
    """
    gd = dict(gate_depolarizing or {})
    if level == "none":
        return NoiseModel(gd)
    if level == "weak":
        return NoiseModel(gd, WEAK_READOUT, PREP_SIGMA_DEGREES)
    if level == "strong":
        return NoiseModel(gd, STRONG_READOUT, PREP_SIGMA_DEGREES)
    raise InvalidArgumentError(f"unknown SPAM level {level!r}; expected one of {SPAM_LEVELS}")


@dataclass(frozen=True)
class ShotResult:
    counts: dict[str, int]
    shots: int

    def __post_init__(self):
        if sum(self.counts.values()) != self.shots:
            raise InvalidArgumentError("counts do not sum to the number of shots")


# ---------------------------------------------------------------------------
# exact execution
# ---------------------------------------------------------------------------

def evolve(rhos: np.ndarray, circuit: Circuit, noise: NoiseModel | None = None) -> np.ndarray:
    """Run ``circuit`` (with gate noise) on a stack of density matrices."""
    n = circuit.n_qubits
    for g in circuit.gates:
        rhos = _apply_gate(rhos, g, n)
        if noise is not None:
            lam = noise.gate_lambda(g)
            if lam:
                rhos = apply_local_depolarizing(rhos, lam, g.targets)
    return rhos


def run_exact(circuit: Circuit, noise: NoiseModel | None, rho0: DensityMatrix) -> DensityMatrix:
    """Density-matrix execution of ``circuit`` with per-gate depolarizing noise."""
    if rho0.n_qubits != circuit.n_qubits:
        raise InvalidArgumentError(
            f"{rho0.n_qubits}-qubit state for a {circuit.n_qubits}-qubit circuit")
    out = evolve(rho0.matrix[None].copy(), circuit, noise)[0]
    return DensityMatrix((out + out.conj().T) / 2)


def prepare_sic(index: int, n_qubits: int, prep_error: np.ndarray | None = None) -> Circuit:
    """U3 circuit taking ``|0...0>`` to SIC product state ``index``.

    ``prep_error`` is an ``(n_qubits, 3)`` array of error angles (radians);
    when given, an error U3 follows each preparation gate.
    """
    digits = sic_index_digits(index, n_qubits)
    gates = [Gate("U3", (q,), SIC_PREP_ANGLES[k]) for q, k in enumerate(digits)]
    if prep_error is not None:
        err = np.asarray(prep_error, dtype=float).reshape(n_qubits, 3)
        gates += [Gate("U3", (q,), tuple(err[q])) for q in range(n_qubits)]
    return Circuit(n_qubits, tuple(gates))


def sample_prep_error(sigma_degrees: float, rng: np.random.Generator,
                      n_qubits: int = 1, size: int | None = None) -> np.ndarray:
    """I.i.d. Normal(0, sigma) Euler angles, returned in radians.

    Shape ``(n_qubits, 3)``, or ``(size, n_qubits, 3)`` when ``size`` is given.
    """
    if sigma_degrees < 0:
        raise InvalidArgumentError("sigma must be non-negative")
    shape = (n_qubits, 3) if size is None else (size, n_qubits, 3)
    if sigma_degrees == 0:
        return np.zeros(shape)
    return np.deg2rad(rng.normal(0.0, sigma_degrees, size=shape))


def prepared_sic_stack(n_qubits: int, prep_errors: np.ndarray | None = None) -> np.ndarray:
    """Density matrices of all ``4**n`` prepared SIC product states.

    ``prep_errors`` has shape ``(4**n, n_qubits, 3)``: error angles for each
    prepared state and qubit.
    """
    kets = product_kets(_prepared_single_kets(n_qubits, prep_errors))
    return np.einsum("sa,sb->sab", kets, kets.conj())


# ---------------------------------------------------------------------------
# measurement
# ---------------------------------------------------------------------------

_BASIS_CHANGE = {
    "I": np.eye(2, dtype=complex),
    "Z": np.eye(2, dtype=complex),
    "X": _FIXED["H"],
    "Y": _FIXED["H"] @ _FIXED["Sdg"],
}


def _rotated_probabilities(rho: np.ndarray, pauli: PauliString) -> np.ndarray:
    v = np.ones((1, 1), dtype=complex)
    for c in pauli.label:
        v = np.kron(v, _BASIS_CHANGE[c])
    probs = np.real(np.diag(v @ rho @ v.conj().T))
    probs = np.clip(probs, 0, None)
    return probs / probs.sum()


def sample_pauli_counts(rho, pauli: PauliString | str, shots: int,
                        readout=None, rng: np.random.Generator | None = None) -> ShotResult:
    """Measure every qubit in the basis of ``pauli`` and apply readout flips.

    Bitstrings list qubit 0 first; identity positions are read out in Z.
    """
    if isinstance(pauli, str):
        pauli = PauliString(pauli)
    if shots < 1:
        raise InvalidArgumentError("shots must be >= 1")
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    n = pauli.n_qubits
    if m.shape[0] != 2**n:
        raise InvalidArgumentError("state and Pauli act on different qubit counts")
    rng = np.random.default_rng() if rng is None else rng
    outcomes = rng.choice(2**n, size=shots, p=_rotated_probabilities(m, pauli))
    bits = (outcomes[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    if readout is not None:
        mats = np.broadcast_to(readout, (n, 2, 2)) if np.ndim(readout) == 2 else readout
        mats = np.stack([_confusion(c) for c in mats])
        flip_p = mats[np.arange(n)[None, :], bits, 1 - bits]
        bits = np.where(rng.random(bits.shape) < flip_p, 1 - bits, bits)
    keys, counts = np.unique(bits, axis=0, return_counts=True)
    return ShotResult({"".join(map(str, k)): int(c) for k, c in zip(keys, counts)}, shots)


def parity_estimate(result: ShotResult, pauli: PauliString | str) -> float:
    if isinstance(pauli, str):
        pauli = PauliString(pauli)
    support = pauli.support
    total = 0
    for bits, c in result.counts.items():
        total += c * (-1) ** sum(int(bits[k]) for k in support)
    return total / result.shots


def measure_pauli_shots(rho, pauli: PauliString | str, shots: int = DEFAULT_SHOTS,
                        readout=None, rng: np.random.Generator | None = None) -> float:
    """Shot estimate of ``<W>``: mean parity of the measured bits on the support of ``W``."""
    if isinstance(pauli, str):
        pauli = PauliString(pauli)
    if readout is not None:
        if np.ndim(readout) == 2:
            _confusion(readout)
        else:
            for c in readout:
                _confusion(c)
    if pauli.is_identity():
        return 1.0
    return parity_estimate(sample_pauli_counts(rho, pauli, shots, readout, rng), pauli)


def readout_pauli_maps(readout: np.ndarray) -> np.ndarray:
    """Per-qubit 4x4 maps taking ideal Pauli expectations to readout-distorted ones.

    A flip channel ``C`` turns the measured sign ``(-1)**t`` into
    ``alpha + beta (-1)**t`` in expectation, so each non-identity factor
    ``P`` becomes ``alpha I + beta P``.
    """
    maps = []
    for c in readout:
        c = _confusion(c)
        alpha = (c[0, 0] - c[0, 1] + c[1, 0] - c[1, 1]) / 2
        beta = (c[0, 0] - c[0, 1] - c[1, 0] + c[1, 1]) / 2
        m = np.diag([1.0, beta, beta, beta])
        m[1:, 0] = alpha
        maps.append(m)
    return np.stack(maps)


def apply_readout(table: np.ndarray, readout: np.ndarray | None) -> np.ndarray:
    """Readout-distorted expectations for an ``(S, 4**n)`` Pauli table."""
    if readout is None:
        return table
    n = len(readout)
    s = table.shape[0]
    x = table.reshape((s,) + (4,) * n)
    for k, m in enumerate(readout_pauli_maps(readout)):
        x = np.moveaxis(np.tensordot(m, x, axes=([1], [k + 1])), 0, k + 1)
    return x.reshape(s, 4**n)


def sample_parity_table(exact: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Shot estimates for a table of (readout-distorted) Pauli expectations.

    The parity estimator depends on each shot only through the parity of
    the support bits, so ``shots`` samples of it are a binomial draw with
    success probability ``(1 + <W>) / 2``. Column 0 (identity) stays 1.
    """
    if shots < 1:
        raise InvalidArgumentError("shots must be >= 1")
    p_even = np.clip((1 + exact[:, 1:]) / 2, 0.0, 1.0)
    even = rng.binomial(shots, p_even)
    out = np.empty_like(exact)
    out[:, 0] = 1.0
    out[:, 1:] = 2 * even / shots - 1
    return out


# ---------------------------------------------------------------------------
# experiment pipeline: preparation, body, measurement
#
# Two exact engines share this pipeline. The "density" engine evolves the
# stack of density matrices. The "pauli" engine evolves each state's vector
# of Pauli expectations Tr[rho W_j] directly: a Clifford gate permutes the
# Pauli strings with signs and a depolarizing channel scales those with
# support on its qubits, so both cost O(4**n) per state and gate. It covers
# circuits made of Clifford gates, which includes every RB sequence and the
# builtin CZ targets.
# ---------------------------------------------------------------------------

ENGINES = ("auto", "density", "pauli")


def _prep_errors(n_qubits: int, noise: NoiseModel | None,
                 prep_rng: np.random.Generator | None) -> np.ndarray | None:
    if noise is None or noise.prep_rotation_sigma == 0:
        return None
    if prep_rng is None:
        raise InvalidArgumentError("a prep_rng is required when preparation errors are enabled")
    return sample_prep_error(noise.prep_rotation_sigma, prep_rng, n_qubits, size=4**n_qubits)


def _prepared_single_kets(n_qubits: int, errors: np.ndarray | None) -> np.ndarray:
    digits = np.array([sic_index_digits(i, n_qubits) for i in range(4**n_qubits)])
    single = SIC_KETS[digits]  # (S, n, 2)
    if errors is not None:
        single = np.einsum("sqab,sqb->sqa", u3_matrices(np.asarray(errors)), single)
    return single


def prepared_inputs(n_qubits: int, noise: NoiseModel | None,
                    prep_rng: np.random.Generator | None) -> np.ndarray:
    """Density matrices of the ``4**n`` prepared SIC states (with rotation errors)."""
    kets = product_kets(_prepared_single_kets(n_qubits, _prep_errors(n_qubits, noise, prep_rng)))
    return np.einsum("sa,sb->sab", kets, kets.conj())


def prepared_pauli_table(n_qubits: int, noise: NoiseModel | None,
                         prep_rng: np.random.Generator | None) -> np.ndarray:
    """Pauli expectation vectors of the same prepared states, shape ``(4**n, 4**n)``.

    Draws exactly the same preparation errors as :func:`prepared_inputs`
    for the same ``prep_rng`` state.
    """
    single = _prepared_single_kets(n_qubits, _prep_errors(n_qubits, noise, prep_rng))
    paulis = np.stack([PAULI_MATRICES[c] for c in "IXYZ"])
    bloch = np.real(np.einsum("sqa,kab,sqb->sqk", single.conj(), paulis, single))
    out = bloch[:, 0, :]
    for k in range(1, n_qubits):
        out = np.einsum("sa,sb->sab", out, bloch[:, k, :]).reshape(out.shape[0], -1)
    return out


@lru_cache(maxsize=None)
def _heisenberg_map(kind: str) -> tuple[np.ndarray, np.ndarray]:
    """``G^dagger P_a G = sign[a] P_perm[a]`` over local Pauli strings ``P_a``."""
    g = _FIXED[kind]
    k = 1 if g.shape[0] == 2 else 2
    labels = ["".join(t) for t in itertools.product("IXYZ", repeat=k)]
    mats = [PauliString(lab).matrix for lab in labels]
    perm = np.empty(4**k, dtype=np.intp)
    sign = np.empty(4**k)
    for a, pa in enumerate(mats):
        img = g.conj().T @ pa @ g
        coeffs = np.array([np.real(np.trace(pb @ img)) / 2**k for pb in mats])
        b = int(np.argmax(np.abs(coeffs)))
        perm[a], sign[a] = b, np.round(coeffs[b])
    return perm, sign


def is_clifford_gate(gate: Gate) -> bool:
    return gate.kind != "U3"


@lru_cache(maxsize=None)
def _depolarizing_scale(lam: float, targets: tuple[int, ...], n_qubits: int) -> np.ndarray:
    """Per-Pauli factor: ``1 - lam`` on strings with support on ``targets``, else 1."""
    idx = np.arange(4**n_qubits)
    touched = np.zeros(4**n_qubits, dtype=bool)
    for t in targets:
        touched |= (idx // 4 ** (n_qubits - 1 - t)) % 4 != 0
    return np.where(touched, 1 - lam, 1.0)


@lru_cache(maxsize=None)
def _gate_monomial(kind: str, targets: tuple[int, ...], n_qubits: int) -> tuple[np.ndarray, np.ndarray]:
    """Full-register form of :func:`_heisenberg_map`: ``G^dag W_j G = sign[j] W_perm[j]``."""
    lperm, lsign = _heisenberg_map(kind)
    idx = np.arange(4**n_qubits)
    digits = [(idx // 4 ** (n_qubits - 1 - q)) % 4 for q in range(n_qubits)]
    local = np.zeros_like(idx)
    for t in targets:
        local = 4 * local + digits[t]
    image = lperm[local]
    new_digits = list(digits)
    for pos, t in enumerate(reversed(targets)):
        new_digits[t] = (image // 4**pos) % 4
    perm = np.zeros_like(idx)
    for q in range(n_qubits):
        perm = 4 * perm + new_digits[q]
    return perm, lsign[local]


def pauli_monomial(circuit: Circuit, noise: NoiseModel | None = None) -> tuple[np.ndarray, np.ndarray]:
    """The noisy Clifford circuit as a map on Pauli expectations.

    Returns ``(perm, coeff)`` with ``out[:, j] = coeff[j] * in[:, perm[j]]``:
    signed permutations (gates) and diagonal scalings (depolarizing noise)
    compose into a single map of this form.
    """
    n = circuit.n_qubits
    perm = np.arange(4**n)
    coeff = np.ones(4**n)
    for g in circuit.gates:
        if not is_clifford_gate(g):
            raise InvalidArgumentError(f"the Pauli engine cannot run non-Clifford gate {g.kind}")
        p, sgn = _gate_monomial(g.kind, g.targets, n)
        perm = perm[p]
        coeff = sgn * coeff[p]
        if noise is not None:
            lam = noise.gate_lambda(g)
            if lam:
                coeff = coeff * _depolarizing_scale(lam, g.targets, n)
    return perm, coeff


def evolve_pauli_table(table: np.ndarray, circuit: Circuit,
                       noise: NoiseModel | None = None) -> np.ndarray:
    """Evolve ``(S, 4**n)`` Pauli expectation vectors through a Clifford circuit."""
    perm, coeff = pauli_monomial(circuit, noise)
    return np.asarray(table, dtype=float)[:, perm] * coeff


def resolve_engine(circuit: Circuit, engine: str = "auto") -> str:
    if engine not in ENGINES:
        raise InvalidArgumentError(f"unknown engine {engine!r}; expected one of {ENGINES}")
    if engine == "auto":
        return "pauli" if all(is_clifford_gate(g) for g in circuit.gates) else "density"
    return engine


def prepare_state(n_qubits: int, noise: NoiseModel | None,
                  prep_rng: np.random.Generator | None, engine: str) -> np.ndarray:
    if engine == "pauli":
        return prepared_pauli_table(n_qubits, noise, prep_rng)
    return prepared_inputs(n_qubits, noise, prep_rng)


def advance(state: np.ndarray, circuit: Circuit, noise: NoiseModel | None, engine: str) -> np.ndarray:
    if engine == "pauli":
        return evolve_pauli_table(state, circuit, noise)
    return evolve(state, circuit, noise)


def read_out(state: np.ndarray, noise: NoiseModel | None, engine: str, *,
             shots: int | None = None, shot_rng: np.random.Generator | None = None) -> np.ndarray:
    table = state if engine == "pauli" else pauli_expectations(state)
    return measure_expectations(table, noise, shots=shots, shot_rng=shot_rng)


def measure_expectations(table: np.ndarray, noise: NoiseModel | None, *,
                         shots: int | None = None,
                         shot_rng: np.random.Generator | None = None) -> np.ndarray:
    """Apply readout distortion and, in shot mode, binomial sampling to an exact table."""
    n = int(round(np.log2(table.shape[1]) / 2))
    if noise is not None:
        table = apply_readout(table, noise.readout_matrices(n))
    if shots is not None:
        if shot_rng is None:
            raise InvalidArgumentError("a shot_rng is required in shot mode")
        table = sample_parity_table(table, shots, shot_rng)
    return table


def measured_table(final: np.ndarray, noise: NoiseModel | None, *,
                   shots: int | None = None,
                   shot_rng: np.random.Generator | None = None) -> np.ndarray:
    """:func:`measure_expectations` for a stack of final density matrices."""
    return measure_expectations(pauli_expectations(final), noise, shots=shots, shot_rng=shot_rng)


def expectation_table(body: Circuit, noise: NoiseModel | None, *,
                      shots: int | None = None,
                      prep_rng: np.random.Generator | None = None,
                      shot_rng: np.random.Generator | None = None,
                      engine: str = "auto") -> np.ndarray:
    """Estimated ``Tr[Gamma(rho_i) W_j]`` for all SIC inputs and Pauli strings.

    Runs the full noisy experiment: SIC preparation (with rotation errors
    drawn from ``prep_rng``, one set per prepared state), the noisy body,
    readout distortion and, when ``shots`` is given, binomial shot sampling.
    """
    engine = resolve_engine(body, engine)
    state = prepare_state(body.n_qubits, noise, prep_rng, engine)
    state = advance(state, body, noise, engine)
    return read_out(state, noise, engine, shots=shots, shot_rng=shot_rng)


def cz_layer(n_qubits: int) -> Circuit:
    """Builtin CZ target circuit with ``2 (n - 1)`` CZ gates.

    Nearest-neighbour chain ``(q, q+1)``, then next-nearest pairs
    ``(q, q+2)``, then the closing pair ``(0, n-1)``; four gates on three
    qubits, six on four and eight on five.
    """
    if n_qubits < 2:
        raise InvalidArgumentError("cz_layer needs at least two qubits")
    pairs = [(q, q + 1) for q in range(n_qubits - 1)]
    pairs += [(q, q + 2) for q in range(n_qubits - 2)]
    pairs += [(0, n_qubits - 1)]
    return Circuit(n_qubits, tuple(Gate("CZ", p) for p in pairs))


def gates_of(circuits: Iterable[Circuit]) -> tuple[Gate, ...]:
    out: list[Gate] = []
    for c in circuits:
        out.extend(c.gates)
    return tuple(out)
