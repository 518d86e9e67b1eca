import math

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from epiecon.errors import DomainError, StabilityError
from epiecon.seir import (
    CompartmentState, IncubationDist, SeirParams, daily_new_infections,
    effective_R, incubation_map, infer_true_infection_rate, run_seir,
    sample_incubation, seir_step, INCUBATION_MAX_DAYS,
)


def test_step_no_transmission_decay_only():
    state = CompartmentState(0.9, 0.0, 0.05, 0.05)
    params = SeirParams(0.5, 0.2, 0.1)
    nxt = seir_step(state, params, 0.0)
    assert nxt.S == pytest.approx(0.9)
    assert nxt.E == pytest.approx(0.0)
    assert nxt.I == pytest.approx(0.05 - 0.1 * 0.05)
    assert nxt.R == pytest.approx(0.05 + 0.1 * 0.05)


def test_step_disease_free_fixed_point():
    state = CompartmentState(0.7, 0.0, 0.0, 0.3)
    nxt = seir_step(state, SeirParams(0.9, 0.3, 0.2), 1.3)
    assert nxt.as_tuple() == pytest.approx(state.as_tuple())


def test_step_direct_evaluation():
    state = CompartmentState(0.99, 0.0, 0.01, 0.0)
    params = SeirParams(0.5, 0.2, 0.1)
    nxt = seir_step(state, params, 1.0)
    assert nxt.S == pytest.approx(0.98505)
    assert nxt.E == pytest.approx(0.00495)
    assert nxt.I == pytest.approx(0.009)
    assert nxt.R == pytest.approx(0.001)


def test_step_rejects_negative_rate():
    state = CompartmentState(0.99, 0.0, 0.01, 0.0)
    with pytest.raises(DomainError):
        seir_step(state, SeirParams(0.5, 0.2, 0.1), -0.5)


def test_step_stability_error_on_blowup():
    state = CompartmentState(0.5, 0.0, 0.5, 0.0)
    with pytest.raises(StabilityError):
        # transmission term 10 * 2 * 0.5 * 0.5 = 5 pushes S negative
        seir_step(state, SeirParams(2.0, 0.2, 0.1), 10.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 1.5), st.floats(0.05, 1.0), st.floats(0.05, 1.0),
       st.floats(0.0, 1.0), st.integers(0, 2 ** 31 - 1))
def test_conservation_365_steps(beta, alpha, gamma, r_scale, seed):
    rng = np.random.default_rng(seed)
    e, i = rng.uniform(0, 0.02, 2)
    state = CompartmentState(1.0 - e - i, e, i, 0.0)
    params = SeirParams(beta, alpha, gamma)
    r_t = r_scale / beta  # keep the one-day transmission flow below the pool
    for _ in range(365):
        state = seir_step(state, params, r_t)
    assert abs(sum(state.as_tuple()) - 1.0) < 1e-9


def test_monotonicity_R_nondecreasing_S_nonincreasing():
    state = CompartmentState(0.95, 0.02, 0.02, 0.01)
    params = SeirParams(0.6, 0.25, 0.12)
    states = run_seir(state, params, np.linspace(0.0, 1.5, 120))
    S = np.array([s.S for s in states])
    R = np.array([s.R for s in states])
    assert np.all(np.diff(S) <= 1e-15)
    assert np.all(np.diff(R) >= -1e-15)


def test_classic_epidemic_single_interior_peak():
    # beta/gamma > 1 with a small seed: infections rise then fall exactly once
    state = CompartmentState(1.0 - 2e-4, 1e-4, 1e-4, 0.0)
    params = SeirParams(0.4, 0.2, 0.1)
    states = run_seir(state, params, np.ones(700))
    I = np.array([s.I for s in states])
    peak = I.argmax()
    assert 0 < peak < len(I) - 1
    assert np.all(np.diff(I[:peak + 1]) > 0)
    assert np.all(np.diff(I[peak:]) < 0)


def test_effective_R_fully_susceptible_limit():
    params = SeirParams(0.4, 0.2, 0.1)
    state = CompartmentState(1.0, 0.0, 0.0, 0.0)
    assert effective_R(state, params, 1.0) == pytest.approx(4.0)


def test_effective_R_zero_rate():
    params = SeirParams(0.4, 0.2, 0.1)
    state = CompartmentState(0.8, 0.1, 0.05, 0.05)
    assert effective_R(state, params, 0.0) == 0.0


def test_effective_R_direct_formula():
    params = SeirParams(0.3, 0.2, 0.1)
    state = CompartmentState(0.5, 0.2, 0.2, 0.1)
    assert effective_R(state, params, 1.0) == pytest.approx(1.5)


# --- active-pool infections ------------------------------------------------------

def test_daily_new_infections_zero_rate():
    assert daily_new_infections(5000.0, 1000.0, 0.0) == 0.0


def test_daily_new_infections_direct():
    assert daily_new_infections(1500.0, 500.0, 0.02) == pytest.approx(20.0)


def test_daily_new_infections_empty_pool():
    assert daily_new_infections(800.0, 800.0, 0.5) == 0.0


def test_daily_new_infections_negative_pool_clipped():
    assert daily_new_infections(100.0, 300.0, 0.5) == 0.0


# --- incubation -------------------------------------------------------------------

def test_incubation_defaults_mean_seven_days():
    dist = IncubationDist()
    # Weibull(k=2, scale=7.9) has continuous mean 7.9 * gamma(1.5) ~ 7.0
    assert dist.scale * math.gamma(1.5) == pytest.approx(7.0, abs=0.01)


def test_incubation_map_zero_input():
    out = incubation_map(np.zeros(5), IncubationDist())
    assert np.allclose(out, 0.0)


def test_incubation_map_mass_conservation():
    out = incubation_map([1000.0], IncubationDist())
    assert out.sum() == pytest.approx(1000.0, abs=1e-6)
    assert out[0] == 0.0  # delay is at least one day


def test_incubation_map_tight_distribution_is_shift():
    # near-deterministic delay: huge shape, scale 4.6 puts all mass on day 5
    dist = IncubationDist(shape=200.0, scale=4.6)
    infections = np.array([10.0, 20.0, 0.0])
    out = incubation_map(infections, dist)
    assert out[5] == pytest.approx(10.0)
    assert out[6] == pytest.approx(20.0)
    assert out.sum() == pytest.approx(30.0)


def test_incubation_map_expected_matches_cdf_oracle():
    dist = IncubationDist()
    # independent oracle: discretized CDF differences, renormalized over 1..21
    ks = np.arange(0, 22, dtype=float)
    cdf = 1.0 - np.exp(-(ks / dist.scale) ** dist.shape)
    probs = np.diff(cdf) / (cdf[-1] - cdf[0])
    out = incubation_map([1.0], dist)
    assert np.allclose(out[1:22], probs)


def test_incubation_map_sampled_mode_conserves_counts():
    rng = np.random.default_rng(0)
    out = incubation_map([500.0, 250.0], IncubationDist(), mode="sampled", rng=rng)
    assert out.sum() == pytest.approx(750.0)
    assert np.all(out >= 0)


def test_sample_incubation_bounds_and_determinism():
    dist = IncubationDist()
    draws = sample_incubation(dist, np.random.default_rng(7), size=10000)
    assert draws.min() >= 1 and draws.max() <= INCUBATION_MAX_DAYS
    again = sample_incubation(dist, np.random.default_rng(7), size=10000)
    assert np.array_equal(draws, again)


def test_sample_incubation_mean_matches_analytic():
    dist = IncubationDist()
    draws = sample_incubation(dist, np.random.default_rng(11), size=1_000_000)
    analytic = dist.mean_sampled_days()
    assert abs(draws.mean() - analytic) / analytic < 0.02


def test_sampled_day_probabilities_sum_to_one():
    probs = IncubationDist().clamped_day_probabilities()
    assert probs.sum() == pytest.approx(1.0)
    assert np.all(probs >= 0)


# --- inferred infection-rate targets -----------------------------------------------

def test_infer_rate_constant_steady_state():
    # constant confirmations c with constant active pool a: rate = c / a
    days = 40
    new_c = np.full(days, 50.0)
    cum_c = 1000.0 + np.cumsum(new_c)
    cum_r = cum_c - 500.0  # active pool fixed at 500
    rates = infer_true_infection_rate(new_c, cum_c, cum_r, IncubationDist())
    assert np.allclose(rates, 0.1)
    assert len(rates) == days - 7


def test_infer_rate_zero_confirmations():
    days = 30
    zeros = np.zeros(days)
    rates = infer_true_infection_rate(zeros, zeros, zeros, IncubationDist())
    assert np.allclose(rates, 0.0)


def test_infer_rate_too_short_series():
    with pytest.raises(DomainError):
        infer_true_infection_rate(np.ones(5), np.ones(5), np.zeros(5), IncubationDist())


def test_infer_rate_zero_active_carries_forward():
    days = 30
    new_c = np.full(days, 20.0)
    cum_c = np.cumsum(new_c)
    cum_r = cum_c.copy()  # active pool always zero
    cum_r[10:] -= 100.0   # pool of 100 from day 10 on
    rates = infer_true_infection_rate(new_c, cum_c, cum_r, IncubationDist())
    assert np.allclose(rates[:10], 0.0)  # undefined, carried from initial 0
    assert np.allclose(rates[10:], 0.2)


def test_infer_rate_roundtrip_reconstruction():
    # rate -> infections -> expected incubation -> confirmations should
    # approximately invert on smooth data
    rng = np.random.default_rng(3)
    days = 120
    dist = IncubationDist()
    active = 10000.0 * (1.0 + 0.5 * np.sin(np.arange(days) / 18.0))
    true_rate = 0.02 * (1.0 + 0.4 * np.cos(np.arange(days) / 25.0))
    infections = active * true_rate
    confirmed = incubation_map(infections, dist)[:days]
    # build pseudo-cumulative series with the prescribed active pool
    cum_c = np.cumsum(confirmed) + 5000.0
    cum_r = cum_c - active
    rates = infer_true_infection_rate(confirmed, cum_c, cum_r, dist)
    infections_back = active[:len(rates)] * rates
    reconstructed = incubation_map(infections_back, dist)[:len(rates)]
    lo = 25  # skip the warmup where the queue is only partially filled
    mape = np.mean(np.abs(reconstructed[lo:] - confirmed[lo:len(rates)])
                   / confirmed[lo:len(rates)])
    assert mape < 0.10
