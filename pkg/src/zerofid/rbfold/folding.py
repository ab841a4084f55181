"""Noise scaling by identity folding.

``fold_circuit(U, m)`` runs ``U`` and then ``m`` more copies alternating
``U^dagger, U, U^dagger, ...``. The ideal action of the folded circuit is
``U`` for even ``m`` and the identity for odd ``m``, while the gate noise
grows with every copy. Comparing each folded circuit against its own ideal
action, the zero-fidelity decays with ``m`` at a per-copy rate set by the
gate noise alone; SPAM enters only the prefactor and offset.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from zerofid.circuit import (
    Circuit,
    NoiseModel,
    advance,
    evolve,
    prepare_state,
    read_out,
    resolve_engine,
)
from zerofid.errors import InvalidArgumentError
from zerofid.parallel import ordered_map
from zerofid.qstate import pauli_expectations, sic_stack
from zerofid.rbfold.fit import DecayPoint, summarize_point
from zerofid.seeding import child_seed, derive_rng


def fold_circuit(target: Circuit, m: int) -> Circuit:
    if m < 0:
        raise InvalidArgumentError(f"fold count must be >= 0, got {m}")
    adj = target.adjoint()
    gates = list(target.gates)
    for k in range(m):
        gates.extend(adj.gates if k % 2 == 0 else target.gates)
    return Circuit(target.n_qubits, tuple(gates))


def ideal_fold_circuit(target: Circuit, m: int) -> Circuit:
    """Shortest circuit with the ideal action of ``fold_circuit(target, m)``."""
    if m < 0:
        raise InvalidArgumentError(f"fold count must be >= 0, got {m}")
    return target if m % 2 == 0 else Circuit(target.n_qubits, ())


def ideal_table(target: Circuit) -> np.ndarray:
    """Noiseless ``Tr[U rho_i U^dagger W_j]`` on the SIC product states."""
    return pauli_expectations(evolve(sic_stack(target.n_qubits), target))


def _fold_run(target: Circuit, m_grid: Sequence[int], noise: NoiseModel | None,
              shots: int | None, base_seed: int, run: int,
              ideals: tuple[np.ndarray, np.ndarray], engine: str) -> list[float]:
    """Fidelities of one run at every grid point, extending the fold incrementally."""
    n = target.n_qubits
    state = prepare_state(n, noise, derive_rng(base_seed, "prep", run), engine)
    state = advance(state, target, noise, engine)
    adj = target.adjoint()
    done = 0
    out = []
    for m in m_grid:
        while done < m:
            state = advance(state, adj if done % 2 == 0 else target, noise, engine)
            done += 1
        table = read_out(state, noise, engine, shots=shots,
                         shot_rng=derive_rng(base_seed, "shots", run, m))
        out.append(float(np.sum(ideals[m % 2] * table)) / 4**n / 2**n)
    return out


def folding_experiment(ideal_target: Circuit, m_grid: Sequence[int], noise: NoiseModel | None,
                       shots: int | None, runs: int, rng: np.random.Generator, *,
                       workers: int = 1, engine: str = "auto") -> list[DecayPoint]:
    """Zero-fidelity of the noisy ``fold_circuit(target, m)`` against its ideal action.

    Each run draws its own preparation errors (stream ``"prep", run``),
    shared by all fold counts of that run; shots use ``"shots", run, m``.
    """
    return folding_experiment_from_seed(ideal_target, m_grid, noise, shots, runs,
                                        child_seed(rng), workers=workers, engine=engine)


def folding_experiment_from_seed(ideal_target: Circuit, m_grid: Sequence[int],
                                 noise: NoiseModel | None, shots: int | None, runs: int,
                                 base_seed: int, *, workers: int = 1,
                                 engine: str = "auto") -> list[DecayPoint]:
    if not m_grid:
        raise InvalidArgumentError("m_grid must not be empty")
    if runs < 1:
        raise InvalidArgumentError("runs must be >= 1")
    grid = sorted(set(int(m) for m in m_grid))
    if grid[0] < 0:
        raise InvalidArgumentError("fold counts must be non-negative")
    engine = resolve_engine(ideal_target, engine)
    ideals = (ideal_table(ideal_target), ideal_table(Circuit(ideal_target.n_qubits, ())))
    per_run = ordered_map(
        lambda r: _fold_run(ideal_target, grid, noise, shots, base_seed, r, ideals, engine),
        range(runs), workers)
    return [summarize_point(m, [vals[i] for vals in per_run]) for i, m in enumerate(grid)]
