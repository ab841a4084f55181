from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zerofid.errors import FitDegenerateError, InvalidArgumentError
from zerofid.rbfold.fit import (
    DecayPoint,
    average_fidelity_from_p,
    fit_decay,
    interleaved_gate_fidelity,
    summarize_point,
)


def synthetic(a0, p, b0, ms):
    return [(m, a0 * p**m + b0) for m in ms]


def test_exact_recovery():
    fit = fit_decay(synthetic(0.9, 0.95, 0.1, range(1, 21)))
    assert fit.A0 == pytest.approx(0.9, abs=1e-6)
    assert fit.p == pytest.approx(0.95, abs=1e-6)
    assert fit.B0 == pytest.approx(0.1, abs=1e-6)
    assert fit.rms_residual < 1e-9


@given(st.floats(0.2, 1.0), st.floats(0.5, 0.995), st.floats(0.0, 0.5))
def test_recovery_property(a0, p, b0):
    fit = fit_decay(synthetic(a0, p, b0, range(0, 25, 2)))
    assert fit.p == pytest.approx(p, abs=1e-6)
    assert fit.A0 == pytest.approx(a0, abs=1e-5)
    assert fit.B0 == pytest.approx(b0, abs=1e-5)


def test_accepts_decay_points():
    pts = [DecayPoint(m, 0.8 * 0.9**m + 0.2, 0.0) for m in range(6)]
    assert fit_decay(pts).p == pytest.approx(0.9, abs=1e-8)


@pytest.mark.parametrize("points, message", [
    ([(1, 0.5), (2, 0.5), (3, 0.5)], "all values equal"),
    ([(1, 0.9), (2, 0.8)], "3 distinct"),
    ([(1, 0.9), (1, 0.8), (2, 0.7)], "3 distinct"),
    ([(1, 0.9), (2, float("nan")), (3, 0.7)], "non-finite"),
    ([], "no data"),
])
def test_degenerate_inputs(points, message):
    with pytest.raises(FitDegenerateError, match=message):
        fit_decay(points)


def test_negative_m_rejected():
    with pytest.raises(InvalidArgumentError):
        fit_decay([(-1, 0.9), (2, 0.8), (3, 0.7)])


@pytest.mark.parametrize("n, p, expected", [(1, 0.98, 0.99), (2, 0.977, 0.98275), (3, 0.952, 0.958)])
def test_average_fidelity(n, p, expected):
    assert average_fidelity_from_p(p, n) == pytest.approx(expected)


def test_epc_from_fit():
    fit = fit_decay(synthetic(0.7, 0.952, 0.15, range(1, 21)), n_qubits=3)
    assert fit.epc == pytest.approx(1 - (0.952 + 0.048 / 8), abs=1e-7)
    assert fit.f_avg + fit.epc == pytest.approx(1)


def test_interleaved_gate_fidelity():
    ref = fit_decay(synthetic(0.8, 0.97, 0.1, range(1, 15)), 2)
    same = fit_decay(synthetic(0.7, 0.97, 0.2, range(1, 15)), 2)
    assert interleaved_gate_fidelity(ref, same, 2) == pytest.approx(1, abs=1e-9)
    lower = fit_decay(synthetic(0.8, 0.97 * 0.96, 0.1, range(1, 15)), 2)
    assert interleaved_gate_fidelity(ref, lower, 2) == pytest.approx(0.96 + 0.04 / 4, abs=1e-7)


def test_fit_is_deterministic():
    r = np.random.default_rng(0)
    data = [(m, 0.7 * 0.95**m + 0.25 + r.normal(0, 0.01)) for m in range(1, 21)]
    assert fit_decay(data) == fit_decay(data)


def test_summarize_point():
    pt = summarize_point(3, [1.0, 2.0, 3.0])
    assert pt.mean == 2.0
    assert pt.stderr == pytest.approx(1 / np.sqrt(3))
    assert summarize_point(1, [0.5]).stderr == 0.0
