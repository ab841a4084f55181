"""Exponential decay fits ``F(m) = A0 p**m + B0``."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from zerofid.errors import FitDegenerateError, InvalidArgumentError

GRID_POINTS = 2001
P_TOL = 1e-12


@dataclass(frozen=True)
class DecayPoint:
    """Averaged fidelity at one sequence length or fold count."""

    m: int
    mean: float
    stderr: float
    values: tuple[float, ...] = ()


@dataclass(frozen=True)
class DecayFit:
    A0: float
    p: float
    B0: float
    rms_residual: float
    f_avg: float
    epc: float
    n_qubits: int

    def to_dict(self) -> dict:
        return {"A0": self.A0, "p": self.p, "B0": self.B0, "rms_residual": self.rms_residual,
                "f_avg": self.f_avg, "epc": self.epc, "n_qubits": self.n_qubits}


def average_fidelity_from_p(p: float, n_qubits: int) -> float:
    return p + (1 - p) / 2**n_qubits


def _linear_part(p: float, m: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    design = np.column_stack([p**m, np.ones_like(m)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = design @ coef - y
    return coef, float(resid @ resid)


def fit_decay(points: Iterable, n_qubits: int = 1) -> DecayFit:
    """Least-squares fit of ``A0 p**m + B0`` with ``p`` in ``[0, 1]``.

    ``points`` holds ``(m, value)`` pairs or :class:`DecayPoint` objects.
    For fixed ``p`` the model is linear in ``(A0, B0)``, so only ``p`` is
    searched: a uniform grid locates the basin and a bounded scalar
    minimization polishes it. The result is deterministic.
    """
    pairs = [(pt.m, pt.mean) if isinstance(pt, DecayPoint) else tuple(pt) for pt in points]
    if n_qubits < 1:
        raise InvalidArgumentError("n_qubits must be >= 1")
    if not pairs:
        raise FitDegenerateError("degenerate decay: no data points")
    m = np.array([float(a) for a, _ in pairs])
    y = np.array([float(b) for _, b in pairs])
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(y))):
        raise FitDegenerateError("degenerate decay: non-finite data")
    if np.any(m < 0):
        raise InvalidArgumentError("sequence lengths must be non-negative")
    if len(np.unique(m)) < 3:
        raise FitDegenerateError("degenerate decay: need at least 3 distinct m values")
    if np.ptp(y) == 0:
        raise FitDegenerateError("degenerate decay: all values equal, p is not identifiable")

    def sse(p: float) -> float:
        return _linear_part(p, m, y)[1]

    grid = np.linspace(0.0, 1.0, GRID_POINTS)
    costs = np.array([sse(p) for p in grid])
    k = int(np.argmin(costs))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, GRID_POINTS - 1)]
    best_p, best_cost = float(grid[k]), float(costs[k])
    res = minimize_scalar(sse, bounds=(lo, hi), method="bounded", options={"xatol": P_TOL})
    if res.fun <= best_cost:
        best_p, best_cost = float(res.x), float(res.fun)
    (a0, b0), _ = _linear_part(best_p, m, y)
    rms = float(np.sqrt(best_cost / len(y)))
    f_avg = average_fidelity_from_p(best_p, n_qubits)
    return DecayFit(float(a0), best_p, float(b0), rms, f_avg, 1 - f_avg, n_qubits)


def interleaved_gate_fidelity(fit_ref: DecayFit, fit_int: DecayFit, n_qubits: int) -> float:
    """Average fidelity of the interleaved target from the ratio ``p_int / p_ref``."""
    if fit_ref.p <= 0:
        raise InvalidArgumentError("reference decay rate must be positive")
    if fit_int.p < 0:
        raise InvalidArgumentError("interleaved decay rate must be non-negative")
    p_gate = fit_int.p / fit_ref.p
    return average_fidelity_from_p(p_gate, n_qubits)


def summarize_point(m: int, values: Sequence[float]) -> DecayPoint:
    """Mean and standard error of the mean over runs or sequences."""
    v = np.asarray(values, dtype=float)
    stderr = float(v.std(ddof=1) / np.sqrt(len(v))) if len(v) > 1 else 0.0
    return DecayPoint(int(m), float(v.mean()), stderr, tuple(float(x) for x in v))


def points_table(points: Sequence[DecayPoint]) -> list[tuple[int, float, float]]:
    return [(pt.m, pt.mean, pt.stderr) for pt in points]
