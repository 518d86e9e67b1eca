"""Synthetic worlds with a known ground truth.

Two generators live here:

* a hand-crafted :class:`ModelBundle` whose forecast networks implement
  explicit, stable feedback (cases depress away-from-home mobility, mobility
  drives the infection rate and unemployment), used to produce closed-loop
  panels against which training can be validated end to end;
* plain correlated source CSVs for exercising the ingestion pipeline and CLI.

The networks are built by placing weights directly: each LSTM is configured
as a memoryless squash (input gate open, forget gate shut, output gate open,
candidate reading the final step), so the ground-truth responses are simple
monotone functions with known signs.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .forecasters import (InfectionModel, MobilityModel, NormStats,
                          UnemploymentModel, N_MOBILITY, WINDOW)
from .panel import Demographics, N_CONTAINMENT, N_POLICIES, Panel, RESIDENTIAL
from .seir import CompartmentState, IncubationDist, SeirParams
from .simulate import ModelBundle, SimState, iterate

GATE_SATURATION = 50.0


def _softplus_inv(y: float) -> float:
    return math.log(math.expm1(y)) if y > 1e-12 else -GATE_SATURATION


def _memoryless_lstm(lstm, candidate_weights):
    """Configure an LSTM so h[0] = sigmoid(50) * tanh(tanh(w . x_T)): the
    forget gate discards history and the candidate reads the last step."""
    H = lstm.hidden_size
    lstm.Wx[...] = 0.0
    lstm.Wh[...] = 0.0
    lstm.b[...] = 0.0
    lstm.b[0:H] = GATE_SATURATION          # input gate open
    lstm.b[H:2 * H] = -GATE_SATURATION     # forget gate shut
    lstm.b[2 * H:3 * H] = GATE_SATURATION  # output gate open
    lstm.Wx[3 * H, :] = np.asarray(candidate_weights, dtype=float)


def _squash(s):
    return math.tanh(math.tanh(s))


@dataclass
class TruthParams:
    """Knobs of the ground-truth world."""

    population: float = 1e7
    seir: SeirParams = field(default_factory=lambda: SeirParams(beta=0.4, alpha=0.2, gamma=0.1))
    e0: float = 8e-4
    i0: float = 1e-3
    r0: float = 2e-3

    # operating-point statistics the truth networks normalize with
    cases_mean: float = 10000.0
    cases_std: float = 20000.0
    u_mean: float = 8.0
    u_std: float = 3.0
    mob_mean: tuple = (-20.0, -10.0, 5.0, -25.0, -30.0, 10.0)
    mob_std: tuple = (8.0, 6.0, 10.0, 8.0, 8.0, 5.0)
    policy_mean: float = 0.5
    policy_std: float = 0.25
    blm_mean: float = 0.05
    blm_std: float = 0.1

    # mobility responses (percent-deviation units)
    mob_base: tuple = (-18.0, -9.0, 6.0, -23.0, -28.0, 9.0)
    case_sensitivity: tuple = (-14.0, -7.0, -9.0, -12.0, -16.0, 6.0)
    # employment drives activity: away-from-home mobility falls as
    # unemployment rises, residential time rises with it
    unemp_sensitivity: tuple = (-3.0, -1.5, -2.0, -2.5, -3.5, 1.5)
    containment_weight: tuple = (0.6, 0.5, 0.4, 0.35, 0.3, 0.45, 0.25, 0.2)
    residential_containment_weight: float = 0.8
    blm_weight: float = 1.5

    # infection-rate response to mobility (workplace-weighted)
    rate_mob_weights: tuple = (0.20, 0.05, 0.02, 0.15, 0.45, -0.35)
    rate_gain: float = 1.1
    rate_base: float = 0.26

    # unemployment response
    u_mob_weights: tuple = (-0.05, -0.02, -0.01, -0.08, -0.45, 0.25)
    u_mob_gain: float = -1.2
    u_persistence: float = 0.6
    u_base: float = 8.0

    incubation: IncubationDist = field(default_factory=IncubationDist)

    # observation noise for generated panels
    mob_noise: float = 0.25
    u_noise: float = 0.03
    case_noise: float = 0.01
    recovery_rate: float = 0.055
    death_rate: float = 0.0018


def default_demographics(population: float = 1e7) -> Demographics:
    return Demographics(pop_density=36.0, population=population, gini=0.48,
                        share_65_plus=0.16, gdp_per_capita=62000.0)


def desk_joint_config(seed: int = 0, **overrides):
    """Joint-training configuration sized for synthetic desk-scale runs:
    small networks and learning rates high enough to converge within a few
    hundred full-batch epochs. The per-module defaults keep the published
    optimizer settings; these are deliberately faster."""
    from .forecasters import (infection_train_config, mobility_train_config,
                              unemployment_train_config)
    from .simulate import JointConfig
    base = dict(
        hidden_size=8, demo_features=4, inner_features=4,
        mobility=mobility_train_config(learning_rate=5e-3, max_epochs=800,
                                       patience=200, seed=seed + 1),
        unemployment=unemployment_train_config(learning_rate=1.2e-2, max_epochs=1500,
                                               patience=400, weight_decay=3e-4,
                                               seed=seed + 2),
        infection=infection_train_config(learning_rate=4e-3, max_epochs=400,
                                         seed=seed + 3),
        max_sweeps=3, seed=seed,
    )
    base.update(overrides)
    return JointConfig(**base)


def make_truth_bundle(params: TruthParams | None = None,
                      demographics: Demographics | None = None) -> ModelBundle:
    p = params or TruthParams()
    demographics = demographics or default_demographics(p.population)
    H, KD, KI = 4, 2, 2

    mobility = MobilityModel(hidden_size=H, demo_features=KD, zero=True)
    mobility.norm_cases = NormStats(p.cases_mean, p.cases_std)
    mobility.norm_unemp = NormStats(p.u_mean, p.u_std)
    mobility.norm_demo = NormStats(demographics.as_vector(), np.ones(5))
    mobility.norm_policy = NormStats(np.full(N_POLICIES, p.policy_mean),
                                     np.full(N_POLICIES, p.policy_std))
    mobility.norm_blm = NormStats(p.blm_mean, p.blm_std)
    for net in mobility.nets:
        i = net.category
        _memoryless_lstm(net.lstm_cases, [1.0])
        _memoryless_lstm(net.lstm_unemp, [1.0])
        net.fc_out.W[...] = 0.0
        net.fc_out.W[0, 0] = p.case_sensitivity[i]
        net.fc_out.W[0, H] = p.unemp_sensitivity[i]
        net.fc_out.b[0] = p.mob_base[i]
        net.policy_theta[...] = -GATE_SATURATION
        if i == RESIDENTIAL:
            for j in range(N_CONTAINMENT):
                net.policy_theta[j] = _softplus_inv(p.residential_containment_weight)
            net.blm_theta[0] = _softplus_inv(p.blm_weight)
        else:
            for j in range(N_CONTAINMENT):
                net.policy_theta[j] = _softplus_inv(p.containment_weight[j] *
                                                    abs(p.case_sensitivity[i]) / 9.0)
            net.blm_theta[0] = -GATE_SATURATION
        net.policy_theta[N_CONTAINMENT:] = 0.0

    unemployment = UnemploymentModel(hidden_size=H, demo_features=KD, inner_features=KI, zero=True)
    unemployment.norm_mob = NormStats(np.array(p.mob_mean), np.array(p.mob_std))
    unemployment.norm_demo = NormStats(demographics.as_vector(), np.ones(5))
    unemployment.norm_u = NormStats(p.u_mean, p.u_std)
    _memoryless_lstm(unemployment.lstm_mob, p.u_mob_weights)
    unemployment.fc_inner.W[...] = 0.0
    unemployment.fc_inner.W[0, 0] = 1.0
    unemployment.fc_out.W[...] = 0.0
    unemployment.fc_out.W[0, 0] = p.u_mob_gain
    unemployment.fc_out.W[0, KI] = p.u_persistence * p.u_std
    unemployment.fc_out.b[0] = p.u_base

    infection = InfectionModel(hidden_size=H, demo_features=KD, zero=True)
    infection.norm_mob = NormStats(np.array(p.mob_mean), np.array(p.mob_std))
    infection.norm_demo = NormStats(demographics.as_vector(), np.ones(5))
    _memoryless_lstm(infection.lstm_mob, p.rate_mob_weights)
    infection.fc_out.W[...] = 0.0
    infection.fc_out.W[0, 0] = p.rate_gain
    infection.fc_out.b[0] = _softplus_inv(p.rate_base)

    return ModelBundle(mobility, unemployment, infection, p.seir, p.e0,
                       p.incubation, demographics)


def exogenous_paths(n_days: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """A reopening schedule over the 14 policy components plus a mid-sample
    protest bump, all already on the smoothed [0, 1] scale. Each component
    carries phase-shifted oscillations throughout so every training window
    sees identifying policy variation, not just the single reopening step."""
    rng = np.random.default_rng(seed)
    t = np.arange(n_days)
    policy = np.zeros((n_days, N_POLICIES))
    for j in range(N_POLICIES):
        strict = 0.55 + 0.25 * math.sin(0.7 * j)
        relax = 1.0 / (1.0 + np.exp(-(t - 0.45 * n_days) / (0.16 * n_days)))
        wiggle = (0.08 * np.sin(2 * np.pi * t / (21.0 + 2.0 * j) + 0.9 * j)
                  + 0.05 * np.sin(2 * np.pi * t / (35.0 + 1.5 * j) + 2.1 * j))
        policy[:, j] = np.clip(strict * (1.0 - 0.55 * relax) + wiggle, 0.0, 1.0)
    blm = np.zeros(n_days)
    bump_start = int(0.55 * n_days)
    width = 14
    for k in range(width):
        idx = bump_start + k
        if idx < n_days:
            blm[idx] = math.sin(math.pi * (k + 1) / (width + 1))
    blm = np.clip(blm + 0.0 * rng.normal(size=n_days), 0.0, 1.0)
    return policy, blm


def generate_panel(bundle: ModelBundle, n_days: int, seed: int = 0,
                   start_date: date = date(2020, 2, 15), warmup: int = 35,
                   noise: TruthParams | None = None,
                   policy_path=None, blm_path=None) -> Panel:
    """Run the ground-truth closed loop for warmup + n_days and turn the
    post-warmup trajectory into an observed panel with light measurement
    noise. Recovered/dead counts follow a constant-hazard outflow from the
    active pool so the cumulative columns stay internally consistent."""
    p = noise or TruthParams()
    total = warmup + n_days
    if policy_path is None or blm_path is None:
        gen_policy, gen_blm = exogenous_paths(total, seed)
        policy_path = gen_policy if policy_path is None else policy_path
        blm_path = gen_blm if blm_path is None else blm_path
    rng = np.random.default_rng(seed + 1)
    pop = bundle.population

    state = CompartmentState(1.0 - p.e0 - p.i0 - p.r0, p.e0, p.i0, p.r0)
    cum_c0 = (p.i0 + p.r0) * pop
    cum_r0 = p.r0 * pop
    init = SimState(
        start=start_date - timedelta(days=warmup),
        compartments=state,
        mobility_hist=np.tile(np.array(p.mob_base), (WINDOW, 1)),
        unemployment_hist=np.full(WINDOW, p.u_base),
        confirmed_hist=np.full(WINDOW, bundle.seir_params.gamma * p.i0 * pop),
        cum_confirmed=cum_c0,
        cum_removed=cum_r0,
    )
    traj = iterate(bundle, init, total, policy_path, blm_path)

    sl = slice(warmup, total)
    mobility = traj.mobility[sl] + rng.normal(0.0, p.mob_noise, (n_days, N_MOBILITY))
    unemployment = np.clip(traj.unemployment[sl] + rng.normal(0.0, p.u_noise, n_days), 0.0, 100.0)
    new_confirmed = np.maximum(
        traj.new_confirmed[sl] * (1.0 + rng.normal(0.0, p.case_noise, n_days)), 0.0)

    # outflow from the active pool at constant daily hazards
    active = float(traj.cum_confirmed[warmup - 1] - cum_r0) if warmup else cum_c0 - cum_r0
    active = max(active, 0.0)
    new_recovered = np.zeros(n_days)
    new_dead = np.zeros(n_days)
    for t in range(n_days):
        new_recovered[t] = p.recovery_rate * active
        new_dead[t] = p.death_rate * active
        active = max(active + new_confirmed[t] - new_recovered[t] - new_dead[t], 0.0)

    carry_c = float(traj.cum_confirmed[warmup - 1])
    carry_r = cum_r0
    dates = [start_date + timedelta(days=i) for i in range(n_days)]
    return Panel(
        dates=dates,
        mobility_raw=mobility,
        mobility_smooth=mobility,
        unemployment=unemployment,
        new_confirmed=new_confirmed,
        new_recovered=new_recovered,
        new_dead=new_dead,
        policy=policy_path[sl],
        blm=blm_path[sl],
        cum_confirmed=carry_c + np.cumsum(new_confirmed),
        cum_removed=carry_r + np.cumsum(new_recovered + new_dead),
    )


# --- raw source files for the ingestion pipeline --------------------------------


def write_synthetic_sources(directory, n_days: int = 150, seed: int = 0,
                            start_date: date = date(2020, 2, 15)) -> dict:
    """Write a correlated synthetic copy of every source file the ingestion
    pipeline consumes; returns the path map."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    t = np.arange(n_days)
    dates = [start_date + timedelta(days=i) for i in range(n_days)]

    wave = 18000.0 * (1.0 + 0.65 * np.sin(2 * np.pi * (t - 20) / 110.0))
    national_cases = np.maximum(wave * (1.0 + rng.normal(0, 0.05, n_days)), 0.0)
    national_recovered = np.concatenate([[0.0] * 10, national_cases[:-10] * 0.9])
    national_dead = np.concatenate([[0.0] * 12, national_cases[:-12] * 0.02])

    case_z = (national_cases - national_cases.mean()) / max(national_cases.std(), 1.0)
    weekday = np.array([0.0, 0.2, 0.3, 0.3, 0.2, -0.6, -0.8])
    base = [-18.0, -9.0, 6.0, -23.0, -28.0, 9.0]
    sens = [-7.0, -4.0, -5.5, -6.5, -8.0, 3.5]
    mobility = np.zeros((n_days, 6))
    for i in range(6):
        mobility[:, i] = (base[i] + sens[i] * case_z
                          + weekday[np.array([d.weekday() for d in dates])]
                          + rng.normal(0, 0.8, n_days))

    mob_path = directory / "mobility.csv"
    with mob_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["country_region_code", "date",
                         "retail_and_recreation_percent_change_from_baseline",
                         "grocery_and_pharmacy_percent_change_from_baseline",
                         "parks_percent_change_from_baseline",
                         "transit_stations_percent_change_from_baseline",
                         "workplaces_percent_change_from_baseline",
                         "residential_percent_change_from_baseline"])
        for i, d in enumerate(dates):
            writer.writerow(["US", d.isoformat()] + [f"{v:.3f}" for v in mobility[i]])

    from .panel import POLICY_INDICATORS
    policy_path = directory / "oxford.csv"
    with policy_path.open("w", newline="") as fh:
        header = ["date"]
        for name, _, has_flag in POLICY_INDICATORS:
            header.append(name)
            if has_flag:
                header.append(name.split("_")[0] + "_flag")
        writer = csv.writer(fh)
        writer.writerow(header)
        reopen_day = int(0.5 * n_days)
        for i, d in enumerate(dates):
            row = [d.isoformat()]
            for j, (name, max_value, has_flag) in enumerate(POLICY_INDICATORS):
                if i < 20 + 2 * j:
                    level = 0
                elif i < reopen_day + 3 * j:
                    level = max_value
                else:
                    level = max(max_value - 2, 0)
                row.append(str(level))
                if has_flag:
                    row.append("1")
            writer.writerow(row)

    claims_path = directory / "claims.csv"
    with claims_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["week_ending_date", "insured_unemployment_rate"])
        for i in range(0, n_days, 7):
            u = 2.0 + 10.0 / (1.0 + math.exp(-(i - 40) / 12.0)) - 4.0 / (1.0 + math.exp(-(i - 100) / 15.0))
            writer.writerow([dates[i].isoformat(), f"{u:.4f}"])

    epi_path = directory / "epi_national.csv"
    with epi_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "new_confirmed", "new_recovered", "new_dead"])
        for i, d in enumerate(dates):
            writer.writerow([d.isoformat(), f"{national_cases[i]:.1f}",
                             f"{national_recovered[i]:.1f}", f"{national_dead[i]:.1f}"])

    state_path = directory / "epi_state.csv"
    shares = {"CA": 0.6, "NY": 0.4}
    with state_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "state", "new_confirmed", "new_recovered", "new_dead"])
        for i, d in enumerate(dates):
            for st, share in shares.items():
                writer.writerow([d.isoformat(), st, f"{national_cases[i] * share:.1f}",
                                 f"{national_recovered[i] * share:.1f}",
                                 f"{national_dead[i] * share:.1f}"])

    protest_path = directory / "protests.csv"
    with protest_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "city", "state", "attendance"])
        bump = int(0.6 * n_days)
        for k in range(12):
            idx = bump + k
            if idx < n_days:
                writer.writerow([dates[idx].isoformat(), "Los Angeles", "CA",
                                 str(int(4000 * math.sin(math.pi * (k + 1) / 13)))])
                writer.writerow([dates[idx].isoformat(), "New York", "NY",
                                 str(int(2500 * math.sin(math.pi * (k + 1) / 13)))])

    demo_path = directory / "demographics.json"
    demo_path.write_text(json.dumps({
        "pop_density": 36.0, "population": 1e7, "gini": 0.48,
        "share_65_plus": 0.16, "gdp_per_capita": 62000.0}))

    return {
        "mobility": mob_path, "oxford": policy_path, "claims": claims_path,
        "epi": epi_path, "state_epi": state_path, "protests": protest_path,
        "demographics": demo_path,
    }
