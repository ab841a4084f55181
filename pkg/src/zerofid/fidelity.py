"""Process fidelity in Pauli, state-set and observable form, and the zero-fidelity.

Raw values use unnormalized Pauli strings and top out at ``2**n``; the
``normalized`` field divides by ``2**n`` so that a perfect channel scores 1.

The zero-fidelity compares ideal and actual Pauli expectations on the
``4**n`` SIC product states::

    F0 = 4**-n * sum_ij Tr[L(rho_i) W_j] Tr[G(rho_i) W_j]

and needs only state preparations and Pauli measurements, which is what
makes it estimable from shots.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from zerofid.channel import Channel
from zerofid.circuit import Circuit, NoiseModel, expectation_table
from zerofid.errors import IllConditionedStateSetError, InvalidArgumentError
from zerofid.qstate import DensityMatrix, pauli_basis, pauli_expectations, sic_stack, vec
from zerofid.seeding import child_seed, derive_rng

MAX_CONDITION = 1e8
NORMALIZED_CEILING = 1 + 1e-6


@dataclass(frozen=True)
class FidelityValue:
    """Fidelity in both scales: ``raw`` (maximum ``2**n``) and ``normalized`` (maximum 1).

    Exact values above 1 signal a bug and are rejected; ``estimated`` values
    come from sampled data and may overshoot by shot noise.
    """

    raw: float
    normalized: float
    estimated: bool = False

    def __post_init__(self):
        if not self.estimated and self.normalized > NORMALIZED_CEILING:
            raise InvalidArgumentError(f"normalized fidelity {self.normalized} exceeds 1")

    @classmethod
    def from_raw(cls, raw: float, n_qubits: int, estimated: bool = False) -> "FidelityValue":
        return cls(float(raw), float(raw) / 2**n_qubits, estimated)

    @classmethod
    def from_normalized(cls, normalized: float, n_qubits: int) -> "FidelityValue":
        return cls(float(normalized) * 2**n_qubits, float(normalized))


@dataclass(frozen=True, eq=False)
class StateSet:
    """Input states for the state-based fidelity forms.

    ``gram[i, j] = Tr[rho_i^dagger rho_j]``. Construction rejects sets that
    are not informationally complete (exactly ``4**n`` states) or whose
    Gram matrix has condition number above ``1e8``.
    """

    states: tuple[DensityMatrix, ...]
    condition_number: float = field(init=False)

    def __post_init__(self):
        states = tuple(s if isinstance(s, DensityMatrix) else DensityMatrix(s) for s in self.states)
        object.__setattr__(self, "states", states)
        if not states:
            raise InvalidArgumentError("empty state set")
        n = states[0].n_qubits
        if any(s.n_qubits != n for s in states):
            raise InvalidArgumentError("states act on different qubit counts")
        if len(states) != 4**n:
            raise InvalidArgumentError(
                f"an informationally complete set on {n} qubits needs {4**n} states, got {len(states)}")
        cond = float(np.linalg.cond(self.gram))
        if not np.isfinite(cond) or cond > MAX_CONDITION:
            raise IllConditionedStateSetError("state set Gram matrix is singular or ill conditioned", cond)
        object.__setattr__(self, "condition_number", cond)

    @classmethod
    def sic(cls, n_qubits: int) -> "StateSet":
        return cls(tuple(DensityMatrix(r) for r in sic_stack(n_qubits)))

    @property
    def n_qubits(self) -> int:
        return self.states[0].n_qubits

    @property
    def vectors(self) -> np.ndarray:
        """Columns ``vec(rho_i)``."""
        return np.stack([vec(s.matrix) for s in self.states], axis=1)

    @property
    def gram(self) -> np.ndarray:
        r = self.vectors
        return r.conj().T @ r


def _check_pair(ideal: Channel, actual: Channel) -> int:
    if ideal.n_qubits != actual.n_qubits:
        raise InvalidArgumentError(f"qubit count mismatch: {ideal.n_qubits} vs {actual.n_qubits}")
    return ideal.n_qubits


def _pauli_vectors(n: int) -> np.ndarray:
    return np.stack([vec(p.matrix) for p in pauli_basis(n)], axis=1)


def process_fidelity_pauli(ideal: Channel, actual: Channel) -> FidelityValue:
    """``4**-n sum_i Tr[L(P_i)^dagger G(P_i)]`` over all Pauli strings."""
    n = _check_pair(ideal, actual)
    p = _pauli_vectors(n)
    li = ideal.superoperator @ p
    ga = actual.superoperator @ p
    raw = np.real(np.sum(li.conj() * ga)) / 4**n
    return FidelityValue.from_raw(raw, n)


def _state_images(c: Channel, s: StateSet) -> np.ndarray:
    return c.superoperator @ s.vectors


def process_fidelity_states(ideal: Channel, actual: Channel, s: StateSet) -> FidelityValue:
    """``4**-n sum_ij [B^-1]_ij Tr[L(rho_i)^dagger G(rho_j)]``.

    Because ``sum_ij [B^-1]_ij |rho_j>><<rho_i|`` is the identity
    superoperator, this sum carries no ``2**n`` weight from the Pauli
    normalization: it already equals the normalized fidelity.
    """
    n = _check_pair(ideal, actual)
    if s.n_qubits != n:
        raise InvalidArgumentError("state set and channels act on different qubit counts")
    li = _state_images(ideal, s)
    ga = _state_images(actual, s)
    overlaps = li.conj().T @ ga  # [i, j] = Tr[L(rho_i)^dagger G(rho_j)]
    binv = np.linalg.solve(s.gram, np.eye(s.gram.shape[0]))
    value = np.real(np.sum(binv.T * overlaps)) / 4**n
    return FidelityValue.from_normalized(value, n)


def process_fidelity_observable(ideal: Channel, actual: Channel, s: StateSet) -> FidelityValue:
    """``4**-n sum_il C_il Tr[G(rho_i) W_l]`` with ``C_il = sum_j [B^-1]_ji Tr[L(rho_j) W_l]``.

    Only Pauli expectations of the actual channel on the prepared states
    enter, as in an experiment.
    """
    n = _check_pair(ideal, actual)
    if s.n_qubits != n:
        raise InvalidArgumentError("state set and channels act on different qubit counts")
    pv = _pauli_vectors(n)
    # Tr[A W] = vec(W)^dagger vec(A) for Hermitian W
    ideal_exp = np.real(_state_images(ideal, s).T @ pv.conj())   # [j, l]
    actual_exp = np.real(_state_images(actual, s).T @ pv.conj())  # [i, l]
    binv = np.linalg.solve(s.gram, np.eye(s.gram.shape[0]))
    c = np.real(binv).T @ ideal_exp
    raw = np.sum(c * actual_exp) / 4**n
    return FidelityValue.from_raw(raw, n)


def sic_expectations(c: Channel) -> np.ndarray:
    """``Tr[C(rho_i) W_j]`` for every SIC product state and Pauli string, shape ``(4**n, 4**n)``."""
    n = c.n_qubits
    rhos = sic_stack(n)
    vecs = np.stack([vec(r) for r in rhos], axis=1)
    images = (c.superoperator @ vecs).T.reshape(-1, 2**n, 2**n).transpose(0, 2, 1)
    return pauli_expectations(images)


def zero_fidelity_from_tables(ideal: np.ndarray, actual: np.ndarray,
                              estimated: bool = False) -> FidelityValue:
    """Zero-fidelity from ideal and actual ``(4**n, 4**n)`` expectation tables.

    Pass ``estimated=True`` when ``actual`` holds shot estimates.
    """
    ideal = np.asarray(ideal, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if ideal.shape != actual.shape or ideal.ndim != 2 or ideal.shape[0] != ideal.shape[1]:
        raise InvalidArgumentError(f"expectation tables must be equal square arrays, got "
                                   f"{ideal.shape} and {actual.shape}")
    s = ideal.shape[0]
    n = int(round(np.log2(s) / 2))
    if 4**n != s:
        raise InvalidArgumentError(f"table size {s} is not a power of four")
    return FidelityValue.from_raw(float(np.sum(ideal * actual)) / s, n, estimated)


def zero_fidelity(ideal: Channel, actual: Channel) -> FidelityValue:
    """Exact zero-fidelity over all SIC product states and Pauli strings."""
    _check_pair(ideal, actual)
    return zero_fidelity_from_tables(sic_expectations(ideal), sic_expectations(actual))


def zero_fidelity_shot_estimate(ideal: Channel, target_circuit: Circuit, noise: NoiseModel | None,
                                shots: int | None, rng: np.random.Generator) -> FidelityValue:
    """Zero-fidelity with simulated experimental data on the actual side.

    Ideal expectations are exact. The actual side runs ``target_circuit``
    under ``noise``: SIC preparation with rotation errors, noisy gates,
    readout distortion and ``shots`` binomial parity samples per setting
    (``shots=None`` gives the exact SPAM-distorted expectations).
    Preparation errors and shot noise draw from separate streams derived
    from ``rng``, so two noise models that share preparation noise see the
    same rotation errors for the same ``rng`` state.
    """
    if ideal.n_qubits != target_circuit.n_qubits:
        raise InvalidArgumentError(
            f"ideal channel on {ideal.n_qubits} qubits, circuit on {target_circuit.n_qubits}")
    base = child_seed(rng)
    table = expectation_table(target_circuit, noise, shots=shots,
                              prep_rng=derive_rng(base, "prep"),
                              shot_rng=derive_rng(base, "shots"))
    return zero_fidelity_from_tables(sic_expectations(ideal), table, estimated=shots is not None)

