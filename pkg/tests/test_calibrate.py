import math

import numpy as np
import pytest

from epiecon.calibrate import (CalibrationResult, NelderMeadConfig, calibrate,
                               initial_state, nelder_mead, seir_fit_loss)
from epiecon.errors import DomainError
from epiecon.seir import CompartmentState, SeirParams, run_seir


# --- simplex solver -------------------------------------------------------------

def test_nelder_mead_1d_quadratic():
    result = nelder_mead(lambda x: (x[0] - 3.0) ** 2, [0.0])
    assert abs(result.x[0] - 3.0) < 1e-6
    assert result.converged


def test_nelder_mead_4d_rosenbrock_bowl():
    def f(x):
        x = np.asarray(x)
        return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))

    config = NelderMeadConfig(max_iter=5000, tolerance=1e-18)
    result = nelder_mead(f, np.zeros(4), config)
    for _ in range(4):  # fresh simplexes walk the curved valley
        result = nelder_mead(f, result.x, config)
    assert result.fval < 1e-10
    assert np.allclose(result.x, 1.0, atol=1e-3)
    # brute grid oracle: no coarse grid point beats the solver
    grid = np.linspace(-2.0, 2.0, 9)
    best_grid = min(f(np.array([a, b, c, d]))
                    for a in grid for b in grid for c in grid for d in grid)
    assert result.fval <= best_grid + 1e-12


def test_nelder_mead_nan_region_never_selected():
    def f(x):
        if x[0] < 0:
            return float("nan")
        return (x[0] - 1.0) ** 2

    result = nelder_mead(f, [4.0])
    assert math.isfinite(result.fval)
    assert result.x[0] >= 0
    assert abs(result.x[0] - 1.0) < 1e-6


def test_nelder_mead_requires_finite_start():
    with pytest.raises(DomainError):
        nelder_mead(lambda x: float("nan"), [0.0])


def test_nelder_mead_respects_iteration_budget():
    calls = []

    def f(x):
        calls.append(1)
        return float(np.sum(x ** 2) if isinstance(x, np.ndarray) else x[0] ** 2)

    result = nelder_mead(lambda x: float(np.sum(np.asarray(x) ** 2)), np.ones(3),
                         NelderMeadConfig(max_iter=5, tolerance=0.0))
    assert result.iterations == 5
    assert not result.converged


# --- compartment-parameter fit -----------------------------------------------------


def _synthetic_observations(params, e0, days=60, i0=1e-3, r0=5e-4):
    state = CompartmentState(1.0 - e0 - i0 - r0, e0, i0, r0)
    states = run_seir(state, params, np.ones(days - 1))
    cum_confirmed = np.array([s.I + s.R for s in states])
    cum_removed = np.array([s.R for s in states])
    return cum_confirmed, cum_removed


def test_calibrate_recovers_known_parameters():
    truth = SeirParams(0.4, 0.2, 0.1)
    c, r = _synthetic_observations(truth, e0=2e-3)
    result = calibrate(c, r)
    assert abs(result.params.beta - truth.beta) / truth.beta < 0.05
    assert abs(result.params.alpha - truth.alpha) / truth.alpha < 0.05
    assert abs(result.params.gamma - truth.gamma) / truth.gamma < 0.05
    assert result.loss < 1e-10


def test_calibrate_perfect_fit_has_zero_loss():
    truth = SeirParams(0.4, 0.2, 0.1)
    e0 = 2e-3
    c, r = _synthetic_observations(truth, e0=e0)
    loss = seir_fit_loss(truth.beta, truth.alpha, truth.gamma, e0, c.tolist(), r.tolist())
    assert loss == pytest.approx(0.0, abs=1e-30)


def test_calibrate_constant_zero_history_flagged_degenerate():
    c = np.zeros(30)
    r = np.zeros(30)
    result = calibrate(c, r)
    assert result.degenerate
    assert result.loss == 0.0


def test_calibrate_requires_two_weeks():
    with pytest.raises(DomainError):
        calibrate(np.linspace(0, 1e-3, 10), np.zeros(10))


def test_calibrate_with_rate_path():
    truth = SeirParams(0.5, 0.25, 0.12)
    e0 = 1e-3
    rates = 0.8 + 0.2 * np.sin(np.arange(59) / 9.0)
    state = CompartmentState(1.0 - e0 - 1e-3 - 5e-4, e0, 1e-3, 5e-4)
    states = run_seir(state, truth, rates)
    c = np.array([s.I + s.R for s in states])
    r = np.array([s.R for s in states])
    result = calibrate(c, r, r_path=rates)
    assert result.loss < 1e-10
    assert abs(result.params.beta - truth.beta) / truth.beta < 0.05


def test_calibrate_unconverged_flag_with_tiny_budget():
    truth = SeirParams(0.4, 0.2, 0.1)
    c, r = _synthetic_observations(truth, e0=2e-3)
    result = calibrate(c, r, nm_config=NelderMeadConfig(max_iter=3, tolerance=0.0),
                       restarts=0, target_loss=0.0)
    assert not result.converged
    assert math.isfinite(result.loss)


def test_calibration_report_fields():
    truth = SeirParams(0.4, 0.2, 0.1)
    c, r = _synthetic_observations(truth, e0=2e-3)
    report = calibrate(c, r).report()
    assert set(report) == {"beta", "alpha", "gamma", "e0", "loss", "converged",
                           "iterations", "degenerate"}


def test_initial_state_consistency():
    state = initial_state(0.01, 0.004, 0.002)
    assert state.I == pytest.approx(0.006)
    assert state.R == pytest.approx(0.004)
    assert state.E == pytest.approx(0.002)
    assert sum(state.as_tuple()) == pytest.approx(1.0)
