"""Reopening-policy what-if engine: exhaustive enumeration of the 255
open/close combinations over the eight containment policies, their simulated
14-day outcomes, the efficient frontier, per-policy marginal statistics, and
protest-index counterfactuals with employment-value equivalence.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date

import numpy as np

from .errors import BracketError, DomainError, RangeError
from .panel import N_CONTAINMENT, Panel
from .simulate import ModelBundle, Trajectory, iterate, sim_state_from_panel

CONTAINMENT_NAMES = [
    "school_closing",
    "workplace_closing",
    "cancel_public_events",
    "restrictions_on_gatherings",
    "close_public_transport",
    "stay_at_home_requirements",
    "internal_movement_restrictions",
    "international_travel_controls",
]

DEFAULT_HORIZON = 14  # two mean incubation periods after the reopening


@dataclass(frozen=True)
class PolicyScenario:
    """`open_mask[i]` lifts containment policy C(i+1) (its index drops to 0,
    fully open) from `start` onward; closed policies keep observed values."""

    open_mask: tuple
    start: date
    horizon: int = DEFAULT_HORIZON

    def __post_init__(self):
        if len(self.open_mask) != N_CONTAINMENT:
            raise DomainError(f"open_mask must cover the {N_CONTAINMENT} containment policies")
        if self.horizon < 1:
            raise DomainError("horizon must be >= 1")

    @property
    def mask_bits(self) -> int:
        return sum(1 << i for i, open_ in enumerate(self.open_mask) if open_)

    def label(self) -> str:
        names = [f"C{i + 1}" for i, open_ in enumerate(self.open_mask) if open_]
        return "+".join(names) if names else "baseline"


@dataclass(frozen=True)
class ScenarioOutcome:
    d_employment: float  # percentage points of employment-rate increase
    d_cases: float       # increase in cumulative confirmed cases

    def as_tuple(self):
        return (self.d_cases, self.d_employment)


@dataclass(frozen=True)
class MarginalPolicyStat:
    policy: str
    avg_d_employment: float
    avg_d_cases: float
    ratio: float | None  # employment increase per extra confirmed case


def enumerate_scenarios(start: date, horizon: int = DEFAULT_HORIZON) -> list[PolicyScenario]:
    """All 255 nonempty open-policy subsets, in binary counting order (mask 1
    = C1 only, mask 255 = everything open)."""
    scenarios = []
    for bits in range(1, 1 << N_CONTAINMENT):
        mask = tuple(bool(bits >> i & 1) for i in range(N_CONTAINMENT))
        scenarios.append(PolicyScenario(mask, start, horizon))
    return scenarios


def _scenario_policy_path(panel: Panel, start_index: int, horizon: int, open_mask) -> np.ndarray:
    path = panel.policy[start_index:start_index + horizon].copy()
    for i, open_ in enumerate(open_mask):
        if open_:
            path[:, i] = 0.0
    return path


def _run_window(bundle: ModelBundle, panel: Panel, start_index: int, horizon: int,
                open_mask, blm_scale: float = 1.0, u_input_shift: float = 0.0) -> Trajectory:
    if start_index + horizon > len(panel):
        raise RangeError("scenario window extends past the end of the panel")
    init = sim_state_from_panel(panel, bundle, start_index)
    policy_path = _scenario_policy_path(panel, start_index, horizon, open_mask)
    blm_path = np.clip(panel.blm[start_index:start_index + horizon] * blm_scale, 0.0, 1.0)
    return iterate(bundle, init, horizon, policy_path, blm_path, u_input_shift=u_input_shift)


def simulate_scenario(bundle: ModelBundle, panel: Panel, scenario: PolicyScenario,
                      start_dates: list[date] | None = None) -> ScenarioOutcome:
    """Outcome of opening the masked policies versus the observed (all-kept)
    baseline, measured at the horizon: employment gain is the drop in the
    simulated unemployment rate, case increase is the extra cumulative
    confirmed count. With several start dates the outcome is their average.
    """
    if start_dates is None:
        start_dates = [scenario.start]
    closed = tuple(False for _ in range(N_CONTAINMENT))
    d_emp, d_cases = 0.0, 0.0
    for when in start_dates:
        start_index = panel.index_of(when)
        base = _run_window(bundle, panel, start_index, scenario.horizon, closed)
        alt = _run_window(bundle, panel, start_index, scenario.horizon, scenario.open_mask)
        d_emp += base.unemployment[-1] - alt.unemployment[-1]
        d_cases += alt.cum_confirmed[-1] - base.cum_confirmed[-1]
    k = len(start_dates)
    return ScenarioOutcome(d_emp / k, d_cases / k)


def run_policy_sweep(bundle: ModelBundle, panel: Panel, start_dates: list[date],
                     horizon: int = DEFAULT_HORIZON, workers: int = 1
                     ) -> dict[int, ScenarioOutcome]:
    """Simulate all 255 combinations, averaging over the given start dates.
    Baselines are shared across scenarios; the per-scenario runs are an
    order-independent parallel map over the immutable bundle."""
    start_indices = [panel.index_of(d) for d in start_dates]
    closed = tuple(False for _ in range(N_CONTAINMENT))
    baselines = {
        idx: _run_window(bundle, panel, idx, horizon, closed) for idx in start_indices
    }
    scenarios = enumerate_scenarios(start_dates[0], horizon)

    def outcome(scenario: PolicyScenario) -> tuple[int, ScenarioOutcome]:
        d_emp, d_cases = 0.0, 0.0
        for idx in start_indices:
            alt = _run_window(bundle, panel, idx, horizon, scenario.open_mask)
            base = baselines[idx]
            d_emp += base.unemployment[-1] - alt.unemployment[-1]
            d_cases += alt.cum_confirmed[-1] - base.cum_confirmed[-1]
        k = len(start_indices)
        return scenario.mask_bits, ScenarioOutcome(d_emp / k, d_cases / k)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(outcome, scenarios))
    else:
        results = dict(map(outcome, scenarios))
    return dict(sorted(results.items()))


def marginal_policy_stats(outcomes: dict[int, ScenarioOutcome]) -> list[MarginalPolicyStat]:
    """Average effect of opening each policy: over all 128 mask pairs that
    differ only in that policy (the empty mask counts as the zero-outcome
    baseline), the mean outcome difference, plus the employment-per-case
    ratio."""
    expected = (1 << N_CONTAINMENT) - 1
    if len(outcomes) != expected or set(outcomes) != set(range(1, expected + 1)):
        raise DomainError(f"need all {expected} scenario outcomes, got {len(outcomes)}")
    stats = []
    for p in range(N_CONTAINMENT):
        bit = 1 << p
        d_emp, d_cases = 0.0, 0.0
        count = 0
        for bits in range(0, 1 << N_CONTAINMENT):
            if bits & bit:
                continue
            without = outcomes[bits] if bits else ScenarioOutcome(0.0, 0.0)
            with_p = outcomes[bits | bit]
            d_emp += with_p.d_employment - without.d_employment
            d_cases += with_p.d_cases - without.d_cases
            count += 1
        avg_emp = d_emp / count
        avg_cases = d_cases / count
        ratio = avg_emp / avg_cases if avg_cases > 0 else None
        stats.append(MarginalPolicyStat(CONTAINMENT_NAMES[p], avg_emp, avg_cases, ratio))
    return stats


@dataclass(frozen=True)
class FrontierPoint:
    mask_bits: int
    d_cases: float
    d_employment: float


def efficient_frontier(outcomes: dict[int, ScenarioOutcome]) -> list[FrontierPoint]:
    """Non-dominated outcomes, sorted by case increase: a point stays iff no
    other has at most its case increase and at least its employment increase
    with one strict. Implemented as a sort-and-scan over (cases asc,
    employment desc)."""
    points = [FrontierPoint(bits, out.d_cases, out.d_employment)
              for bits, out in outcomes.items()]
    points.sort(key=lambda p: (p.d_cases, -p.d_employment))
    frontier = []
    best_emp = -np.inf
    i = 0
    while i < len(points):
        j = i
        while j < len(points) and points[j].d_cases == points[i].d_cases:
            j += 1
        group_max = points[i].d_employment  # sorted desc within the group
        if group_max > best_emp:
            frontier.extend(p for p in points[i:j] if p.d_employment == group_max)
            best_emp = group_max
        i = j
    return frontier


def blm_counterfactual(bundle: ModelBundle, panel: Panel, window_start: date,
                       window_end: date, report_offset: int = 14,
                       report_days: int = 30):
    """Difference between the observed protest path and a zeroed one.

    Simulates from `window_start` far enough to cover `report_offset` days
    past `window_end` plus `report_days` more, and reports the per-day extra
    cases and employment-rate change over that reporting span.
    """
    start_index = panel.index_of(window_start)
    end_index = panel.index_of(window_end)
    if end_index < start_index:
        raise RangeError("window end precedes window start")
    horizon = (end_index - start_index) + report_offset + report_days
    if start_index + horizon > len(panel):
        raise RangeError("reporting span extends past the end of the panel")
    closed = tuple(False for _ in range(N_CONTAINMENT))
    observed = _run_window(bundle, panel, start_index, horizon, closed, blm_scale=1.0)
    zeroed = _run_window(bundle, panel, start_index, horizon, closed, blm_scale=0.0)
    offset = (end_index - start_index) + report_offset
    dates = observed.dates[offset:]
    d_cases = observed.cum_confirmed[offset:] - zeroed.cum_confirmed[offset:]
    d_employment = zeroed.unemployment[offset:] - observed.unemployment[offset:]
    return dates, d_cases, d_employment


def employment_value_equivalence(bundle: ModelBundle, panel: Panel, start: date,
                                 horizon: int, target_d_cases: float,
                                 max_shift: float = 5.0, tol: float = 1e-6) -> float:
    """Uniform employment-rate shift (percentage points, injected into the
    unemployment path the mobility model consumes) whose simulated cumulative
    case increase at the horizon matches `target_d_cases`. Solved by
    bisection on [0, max_shift]."""
    if target_d_cases < 0:
        raise DomainError("target case increase must be >= 0")
    if target_d_cases == 0:
        return 0.0
    start_index = panel.index_of(start)
    closed = tuple(False for _ in range(N_CONTAINMENT))
    base = _run_window(bundle, panel, start_index, horizon, closed)

    def case_gap(shift: float) -> float:
        alt = _run_window(bundle, panel, start_index, horizon, closed, u_input_shift=shift)
        return float(alt.cum_confirmed[-1] - base.cum_confirmed[-1]) - target_d_cases

    lo, hi = 0.0, max_shift
    f_lo = -target_d_cases
    f_hi = case_gap(hi)
    if f_lo * f_hi > 0:
        raise BracketError(
            f"target case increase {target_d_cases} not bracketed by shifts in [0, {max_shift}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = case_gap(mid)
        if f_mid == 0.0:
            return mid
        if f_lo * f_mid < 0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
    return 0.5 * (lo + hi)
