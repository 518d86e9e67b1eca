"""The closed-loop coupled simulation: daily iteration of the forecast
models against the compartment dynamics, the alternating joint-training
procedure, rolling-window out-of-sample evaluation, and forecast metrics.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .calibrate import CalibrationResult, NelderMeadConfig, calibrate, initial_state
from .errors import DomainError, RangeError, StabilityError
from .forecasters import (
    InfectionDataset, InfectionModel, MobilityDataset, MobilityModel,
    UnemploymentDataset, UnemploymentModel, infection_train_config,
    mobility_train_config, train_mobility, train_r, train_u,
    unemployment_train_config, N_MOBILITY, WINDOW,
)
from .nn.training import TrainConfig, deep_copy_model
from .panel import Demographics, Panel
from .seir import (
    CompartmentState, IncubationDist, SeirParams, effective_R,
    infer_true_infection_rate, run_seir, seir_step, INCUBATION_MAX_DAYS,
)


@dataclass
class ModelBundle:
    """Everything needed to run the closed loop."""

    mobility: MobilityModel
    unemployment: UnemploymentModel
    infection: InfectionModel
    seir_params: SeirParams
    e0: float
    incubation: IncubationDist
    demographics: Demographics

    @property
    def population(self) -> float:
        return self.demographics.population

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.mobility.save(directory / "mobility.json")
        self.unemployment.save(directory / "unemployment.json")
        self.infection.save(directory / "infection.json")
        import json
        (directory / "seir.json").write_text(json.dumps({
            "schema_version": 1,
            "beta": self.seir_params.beta,
            "alpha": self.seir_params.alpha,
            "gamma": self.seir_params.gamma,
            "e0": self.e0,
            "incubation_shape": self.incubation.shape,
            "incubation_scale": self.incubation.scale,
            "demographics": {
                "pop_density": self.demographics.pop_density,
                "population": self.demographics.population,
                "gini": self.demographics.gini,
                "share_65_plus": self.demographics.share_65_plus,
                "gdp_per_capita": self.demographics.gdp_per_capita,
            },
        }))

    @classmethod
    def load(cls, directory) -> "ModelBundle":
        directory = Path(directory)
        import json
        blob = json.loads((directory / "seir.json").read_text())
        return cls(
            mobility=MobilityModel.load(directory / "mobility.json"),
            unemployment=UnemploymentModel.load(directory / "unemployment.json"),
            infection=InfectionModel.load(directory / "infection.json"),
            seir_params=SeirParams(blob["beta"], blob["alpha"], blob["gamma"]),
            e0=blob["e0"],
            incubation=IncubationDist(blob["incubation_shape"], blob["incubation_scale"]),
            demographics=Demographics(**blob["demographics"]),
        )


@dataclass
class SimState:
    """Rolling histories and compartment state at the start of a simulation.

    Histories hold days strictly before `start`, most recent last, at least 7
    entries each. `pending_confirmations[k]` are confirmations already in the
    incubation pipeline that will surface k days after the start.
    """

    start: date
    compartments: CompartmentState
    mobility_hist: np.ndarray      # (>=7, 6) smoothed values
    unemployment_hist: np.ndarray  # (>=7,) percent
    confirmed_hist: np.ndarray     # (>=7,) daily new confirmed counts
    cum_confirmed: float
    cum_removed: float
    pending_confirmations: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.mobility_hist = np.asarray(self.mobility_hist, dtype=float)
        self.unemployment_hist = np.asarray(self.unemployment_hist, dtype=float)
        self.confirmed_hist = np.asarray(self.confirmed_hist, dtype=float)
        if (len(self.mobility_hist) < WINDOW or len(self.unemployment_hist) < WINDOW
                or len(self.confirmed_hist) < WINDOW):
            raise DomainError("simulation histories need at least 7 days each")


@dataclass
class Trajectory:
    dates: list
    mobility: np.ndarray       # (h, 6)
    unemployment: np.ndarray   # (h,)
    rate: np.ndarray           # (h,)
    S: np.ndarray
    E: np.ndarray
    I: np.ndarray
    R: np.ndarray
    Rt: np.ndarray
    cum_confirmed: np.ndarray  # counts, I + R scaled by population
    new_confirmed: np.ndarray  # counts surfacing from the incubation pipeline

    def __len__(self):
        return len(self.dates)

    CSV_COLUMNS = (["date"] + [f"m{i}" for i in range(6)]
                   + ["u", "r", "S", "E", "I", "R", "Rt", "cum_confirmed", "new_confirmed"])

    def save_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.CSV_COLUMNS)
            for t, d in enumerate(self.dates):
                row = [d.isoformat()] + [repr(v) for v in self.mobility[t].tolist()]
                row += [repr(float(x)) for x in (
                    self.unemployment[t], self.rate[t], self.S[t], self.E[t], self.I[t],
                    self.R[t], self.Rt[t], self.cum_confirmed[t], self.new_confirmed[t])]
                writer.writerow(row)

    def to_payload(self) -> dict:
        return {
            "dates": [d.isoformat() for d in self.dates],
            "mobility": self.mobility.tolist(),
            "unemployment": self.unemployment.tolist(),
            "rate": self.rate.tolist(),
            "Rt": self.Rt.tolist(),
            "cum_confirmed": self.cum_confirmed.tolist(),
            "new_confirmed": self.new_confirmed.tolist(),
        }


def _empty_trajectory(start: date) -> Trajectory:
    z = np.zeros(0)
    return Trajectory([], np.zeros((0, 6)), z, z, z, z, z, z, z, z, z)


def iterate(bundle: ModelBundle, init: SimState, horizon: int, policy_path,
            blm_path, u_input_shift: float = 0.0) -> Trajectory:
    """Run the closed loop for `horizon` days.

    Each day: predict the six mobility categories from the lagged confirmed
    cases and unemployment (plus demographics and the exogenous policy and
    protest paths), predict unemployment and the infection rate from the
    mobility window ending today, advance the compartments, push the day's
    new infections into the incubation pipeline, and append every prediction
    to its history so the loop closes.

    `u_input_shift` is subtracted from the unemployment values the mobility
    model consumes (a uniform employment-rate increase of the same size); the
    unemployment forecaster's own lag input is left untouched.
    """
    if horizon < 0:
        raise DomainError("horizon must be >= 0")
    if horizon == 0:
        return _empty_trajectory(init.start)
    policy_path = np.asarray(policy_path, dtype=float)
    blm_path = np.asarray(blm_path, dtype=float)
    if len(policy_path) < horizon or len(blm_path) < horizon:
        raise RangeError("exogenous policy/protest paths must cover the horizon")

    demo = bundle.demographics.as_vector()
    pop = bundle.population
    params = bundle.seir_params
    probs = bundle.incubation.day_probabilities()

    mob_hist = list(init.mobility_hist)
    u_hist = list(init.unemployment_hist)
    n_hist = list(init.confirmed_hist)
    queue = np.zeros(horizon + INCUBATION_MAX_DAYS + 1)
    pending = init.pending_confirmations
    queue[:min(len(pending), len(queue))] += pending[:len(queue)]
    state = init.compartments

    dates = []
    mob_out = np.zeros((horizon, 6))
    u_out = np.zeros(horizon)
    r_out = np.zeros(horizon)
    S = np.zeros(horizon)
    E = np.zeros(horizon)
    I = np.zeros(horizon)
    R = np.zeros(horizon)
    Rt = np.zeros(horizon)
    cum_c = np.zeros(horizon)
    new_c = np.zeros(horizon)

    for k in range(horizon):
        cases_window = np.array(n_hist[-WINDOW:])
        u_window = np.array(u_hist[-WINDOW:]) - u_input_shift
        m_t = bundle.mobility.predict_batch(
            cases_window[None], u_window[None], demo[None],
            policy_path[k][None], np.array([blm_path[k]]))[0]
        mob_window = np.vstack([np.array(mob_hist[-(WINDOW - 1):]), m_t])
        u_t = float(bundle.unemployment.predict_batch(
            mob_window[None], demo[None], np.array([u_hist[-WINDOW]]))[0])
        r_t = float(bundle.infection.predict_batch(mob_window[None], demo[None])[0])

        new_infections_frac = r_t * params.beta * state.S * state.I
        try:
            state = seir_step(state, params, r_t)
        except StabilityError as exc:
            raise StabilityError(
                f"compartments left [0, 1] on day {k} ({init.start + timedelta(days=k)}): {exc}",
                last_state=state,
                trajectory=_slice_trajectory(init.start, k, mob_out, u_out, r_out, S, E, I, R,
                                             Rt, cum_c, new_c)) from exc

        queue[k + 1:k + 1 + INCUBATION_MAX_DAYS] += new_infections_frac * pop * probs
        confirmed_today = float(queue[k])

        mob_hist.append(m_t)
        u_hist.append(u_t)
        n_hist.append(confirmed_today)

        dates.append(init.start + timedelta(days=k))
        mob_out[k] = m_t
        u_out[k] = u_t
        r_out[k] = r_t
        S[k], E[k], I[k], R[k] = state.as_tuple()
        Rt[k] = effective_R(state, params, r_t)
        cum_c[k] = (state.I + state.R) * pop
        new_c[k] = confirmed_today

    return Trajectory(dates, mob_out, u_out, r_out, S, E, I, R, Rt, cum_c, new_c)


def _slice_trajectory(start, k, mob, u, r, S, E, I, R, Rt, cum_c, new_c) -> Trajectory:
    dates = [start + timedelta(days=i) for i in range(k)]
    return Trajectory(dates, mob[:k], u[:k], r[:k], S[:k], E[:k], I[:k], R[:k],
                      Rt[:k], cum_c[:k], new_c[:k])


# --- seeding a simulation from a panel ----------------------------------------


def estimate_rate_path(panel: Panel, bundle: ModelBundle, upto: int) -> np.ndarray:
    """Per-day infection-rate estimates for panel days [0, upto), using only
    observations before day `upto`: back-shifted confirmations where the
    shift stays inside the window, and the trained infection model on the
    observed mobility elsewhere."""
    dist = bundle.incubation
    shift = int(round(dist.mean_days()))
    rates = np.zeros(upto)
    n_inferred = max(0, upto - shift)
    if n_inferred > 0:
        inferred = infer_true_infection_rate(
            panel.new_confirmed[:upto], panel.cum_confirmed[:upto],
            panel.cum_removed[:upto], dist)
        rates[:n_inferred] = inferred[:n_inferred]
    demo = bundle.demographics.as_vector()
    tail = [t for t in range(n_inferred, upto) if t >= WINDOW - 1]
    if tail:
        windows = np.stack([panel.mobility_smooth[t - WINDOW + 1:t + 1] for t in tail])
        preds = bundle.infection.predict_batch(windows, np.tile(demo, (len(tail), 1)))
        for t, r in zip(tail, preds):
            rates[t] = r
    for t in range(n_inferred, upto):
        if t < WINDOW - 1:
            rates[t] = rates[t - 1] if t > 0 else 0.0
    return rates


def sim_state_from_panel(panel: Panel, bundle: ModelBundle, start_index: int,
                         rate_path=None) -> SimState:
    """Seed a simulation at panel day `start_index`: observed histories, the
    fitted compartments rolled forward from the panel start, and the pending
    incubation pipeline implied by recent estimated infections."""
    if start_index < WINDOW:
        raise RangeError(f"need at least {WINDOW} days of history before the start")
    if rate_path is None:
        rate_path = estimate_rate_path(panel, bundle, start_index)
    pop = bundle.population
    state0 = initial_state(panel.cum_confirmed[0] / pop, panel.cum_removed[0] / pop, bundle.e0)
    states = run_seir(state0, bundle.seir_params, rate_path[:start_index])
    compartments = states[-1]

    probs = bundle.incubation.day_probabilities()
    pending = np.zeros(INCUBATION_MAX_DAYS)
    active = panel.active_cases()
    for tau in range(max(0, start_index - INCUBATION_MAX_DAYS), start_index):
        infections = max(active[tau], 0.0) * rate_path[tau]
        if infections <= 0:
            continue
        for k in range(1, INCUBATION_MAX_DAYS + 1):
            rel = tau + k - start_index
            if 0 <= rel < len(pending):
                pending[rel] += infections * probs[k - 1]

    lookback = min(start_index, 4 * WINDOW)
    return SimState(
        start=panel.dates[0] + timedelta(days=start_index),
        compartments=compartments,
        mobility_hist=panel.mobility_smooth[start_index - lookback:start_index],
        unemployment_hist=panel.unemployment[start_index - lookback:start_index],
        confirmed_hist=panel.new_confirmed[start_index - lookback:start_index],
        cum_confirmed=float(panel.cum_confirmed[start_index - 1]),
        cum_removed=float(panel.cum_removed[start_index - 1]),
        pending_confirmations=pending,
    )


# --- joint training -------------------------------------------------------------


@dataclass
class JointConfig:
    hidden_size: int = 32
    demo_features: int = 8
    inner_features: int = 16
    mobility: TrainConfig = field(default_factory=mobility_train_config)
    unemployment: TrainConfig = field(default_factory=unemployment_train_config)
    infection: TrainConfig = field(default_factory=infection_train_config)
    incubation: IncubationDist = field(default_factory=IncubationDist)
    validation_fraction: float = 0.2
    outer_patience: int = 1
    max_sweeps: int = 5
    divergence_factor: float = 10.0
    calibration_restarts: int = 4
    calibration_max_iter: int = 2000
    seed: int = 0

    def scaled(self, **kw) -> "JointConfig":
        return replace(self, **kw)


@dataclass
class JointResult:
    bundle: ModelBundle
    sweep_losses: list
    best_sweep: int
    calibration: CalibrationResult


def _mobility_dataset(n_pred, u_pred, panel, demo, lo, hi):
    idx = range(max(lo, WINDOW), hi)
    return MobilityDataset(
        cases_hist=np.stack([n_pred[t - WINDOW:t] for t in idx]),
        unemp_hist=np.stack([u_pred[t - WINDOW:t] for t in idx]),
        demo=np.tile(demo, (len(idx), 1)),
        policy=panel.policy[list(idx)],
        blm=panel.blm[list(idx)],
        targets=panel.mobility_smooth[list(idx)],
    )


def _unemployment_dataset(m_pred, panel, demo, lo, hi):
    idx = range(max(lo, WINDOW), hi)
    return UnemploymentDataset(
        mob_window=np.stack([m_pred[t - WINDOW + 1:t + 1] for t in idx]),
        demo=np.tile(demo, (len(idx), 1)),
        u_prev=panel.unemployment[[t - WINDOW for t in idx]],
        targets=panel.unemployment[list(idx)],
    )


def _infection_dataset(m_pred, rate_targets, demo, lo, hi):
    idx = [t for t in range(max(lo, WINDOW), hi) if t < len(rate_targets)]
    return InfectionDataset(
        mob_window=np.stack([m_pred[t - WINDOW + 1:t + 1] for t in idx]),
        demo=np.tile(demo, (len(idx), 1)),
        targets=rate_targets[idx],
    )


def validation_loss(traj: Trajectory, panel: Panel, start_index: int) -> float:
    """Mean absolute percentage error of cumulative confirmed cases plus mean
    absolute error of the unemployment rate over the validation window."""
    h = len(traj)
    truth_c = panel.cum_confirmed[start_index:start_index + h]
    truth_u = panel.unemployment[start_index:start_index + h]
    mape = float(np.mean(np.abs((traj.cum_confirmed - truth_c) / truth_c))) * 100.0
    mae = float(np.mean(np.abs(traj.unemployment - truth_u)))
    return mape + mae


def joint_train(panel: Panel, demographics: Demographics,
                config: JointConfig | None = None,
                warm_bundle: ModelBundle | None = None) -> JointResult:
    """Alternating training loop: fit the compartment parameters and refresh
    the predicted confirmed counts, train the unemployment model on predicted
    mobility, train the mobility models on predicted counts/unemployment,
    train the infection model on predicted mobility, then score a closed-loop
    run on the held-out validation window. Stops when the validation loss no
    longer decreases and returns the best bundle seen."""
    config = config or JointConfig()
    n = len(panel)
    if n < 8 * WINDOW:
        raise DomainError(f"joint training needs at least an 8-week window, got {n} days")
    n_val = max(WINDOW, int(round(config.validation_fraction * n)))
    n_fit = n - n_val
    pop = demographics.population
    demo = demographics.as_vector()
    dist = config.incubation
    shift = int(round(dist.mean_days()))

    c_frac = panel.cum_confirmed / pop
    r_frac = panel.cum_removed / pop
    rate_targets = infer_true_infection_rate(
        panel.new_confirmed[:n_fit], panel.cum_confirmed[:n_fit],
        panel.cum_removed[:n_fit], dist)

    # current best estimates of each coupled series, observed at first
    rate_series = np.zeros(n_fit)
    rate_series[:len(rate_targets)] = rate_targets
    rate_series[len(rate_targets):] = rate_targets[-1] if len(rate_targets) else 0.0
    m_series = panel.mobility_smooth.copy()[:n_fit]
    u_series = panel.unemployment.copy()[:n_fit]
    n_series = panel.new_confirmed.copy()[:n_fit]

    if warm_bundle is not None:
        mobility = warm_bundle.mobility
        unemployment = warm_bundle.unemployment
        infection = warm_bundle.infection
    else:
        mobility = None
        unemployment = None
        infection = None

    best = None
    best_loss = math.inf
    initial_loss = None
    sweep_losses = []
    since_best = 0
    calibration = None

    nm_config = NelderMeadConfig(max_iter=config.calibration_max_iter)
    for sweep in range(config.max_sweeps):
        # 1. compartment fit given the current rate estimates
        calibration = calibrate(c_frac[:n_fit], r_frac[:n_fit], r_path=rate_series,
                                nm_config=nm_config, restarts=config.calibration_restarts)
        state0 = initial_state(c_frac[0], r_frac[0], calibration.e0)
        states = run_seir(state0, calibration.params, rate_series[:n_fit - 1])
        fitted_c = np.array([(s.I + s.R) * pop for s in states])
        n_series = np.empty(n_fit)
        n_series[0] = panel.new_confirmed[0]
        n_series[1:] = np.maximum(np.diff(fitted_c), 0.0)

        # 2. unemployment on predicted mobility (true lagged rate as anchor)
        uds = _unemployment_dataset(m_series, panel, demo, WINDOW, n_fit)
        if unemployment is None:
            unemployment, _ = train_u(uds, config.unemployment,
                                      hidden_size=config.hidden_size,
                                      demo_features=config.demo_features,
                                      inner_features=config.inner_features)
        else:
            unemployment, _ = train_u(uds, config.unemployment, model=unemployment)
        u_series = panel.unemployment.copy()[:n_fit]
        u_series[WINDOW:n_fit] = unemployment.predict_batch(
            uds.mob_window, uds.demo, uds.u_prev)

        # 3. mobility on predicted counts and unemployment
        mds = _mobility_dataset(n_series, u_series, panel, demo, WINDOW, n_fit)
        if mobility is None:
            mobility, _ = train_mobility(mds, config.mobility,
                                         hidden_size=config.hidden_size,
                                         demo_features=config.demo_features)
        else:
            mobility, _ = train_mobility(mds, config.mobility, model=mobility)
        m_series = panel.mobility_smooth.copy()[:n_fit]
        m_series[WINDOW:n_fit] = mobility.predict_batch(
            mds.cases_hist, mds.unemp_hist, mds.demo, mds.policy, mds.blm)

        # 4. infection rate on predicted mobility
        ids_ = _infection_dataset(m_series, rate_targets, demo, WINDOW, n_fit)
        if infection is None:
            infection, _ = train_r(ids_, config.infection,
                                   hidden_size=config.hidden_size,
                                   demo_features=config.demo_features)
        else:
            infection, _ = train_r(ids_, config.infection, model=infection)
        pred_rates = infection.predict_batch(
            np.stack([m_series[t - WINDOW + 1:t + 1] for t in range(WINDOW, n_fit)]),
            np.tile(demo, (n_fit - WINDOW, 1)))
        rate_series[WINDOW:n_fit] = pred_rates

        bundle = ModelBundle(mobility, unemployment, infection,
                             calibration.params, calibration.e0, dist, demographics)

        # 5. closed-loop scoring on the validation window
        init = sim_state_from_panel(panel, bundle, n_fit)
        traj = iterate(bundle, init, n_val, panel.policy[n_fit:], panel.blm[n_fit:])
        loss = validation_loss(traj, panel, n_fit)
        sweep_losses.append(loss)
        if initial_loss is None:
            initial_loss = loss
        elif loss > config.divergence_factor * max(initial_loss, 1e-12):
            raise DomainError(
                f"joint training diverged at sweep {sweep}: loss {loss:.4g} vs "
                f"initial {initial_loss:.4g}; history {sweep_losses}")

        if loss < best_loss:
            best_loss = loss
            best = deep_copy_model(bundle)
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.outer_patience:
                break

    return JointResult(best, sweep_losses, sweep_losses.index(best_loss), calibration)


# --- rolling evaluation ----------------------------------------------------------


@dataclass
class MetricsReport:
    mae: float
    mape_pct: float | None
    rmse: float
    r2: float | None

    def as_dict(self) -> dict:
        return {"mae": self.mae, "mape_pct": self.mape_pct, "rmse": self.rmse, "r2": self.r2}


def compute_metrics(pred, truth) -> MetricsReport:
    """MAE, MAPE (percent), RMSE and R^2. MAPE is undefined when any truth
    value is zero; R^2 is undefined for zero-variance truth."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise DomainError("prediction and truth must be 1-D with equal length")
    if len(pred) < 2:
        raise DomainError("need at least two points to compute metrics")
    err = pred - truth
    mae = float(np.mean(np.abs(err)))
    rmse = float(np.sqrt(np.mean(err ** 2)))
    mape = None
    if np.all(truth != 0):
        mape = float(100.0 * np.mean(np.abs(err / truth)))
    sst = float(np.sum((truth - truth.mean()) ** 2))
    r2 = None if sst == 0 else float(1.0 - np.sum(err ** 2) / sst)
    return MetricsReport(mae, mape, rmse, r2)


@dataclass
class RollingConfig:
    train_weeks: int = 8
    test_weeks: int = 2
    forecast_horizon: int | None = None  # defaults to the test window length
    joint: JointConfig = field(default_factory=JointConfig)
    warm_start: bool = True


@dataclass
class WindowForecast:
    train_start: int
    test_start: int
    trajectory: Trajectory


@dataclass
class RollingResult:
    windows: list
    pred_unemployment: np.ndarray
    pred_cum_confirmed: np.ndarray
    truth_unemployment: np.ndarray
    truth_cum_confirmed: np.ndarray
    test_indices: np.ndarray
    metrics: dict

    def metrics_payload(self) -> dict:
        return {name: report.as_dict() for name, report in self.metrics.items()}


def rolling_forecast(panel: Panel, demographics: Demographics,
                     config: RollingConfig | None = None) -> RollingResult:
    """Slide an (8-week train, 2-week test) window across the panel with the
    test length as stride, jointly retraining per window (warm-started from
    the previous window's bundle by default). Each forecast is seeded with
    the 7 observed days immediately before the test window and run closed
    loop across the whole test window, so every out-of-sample day is
    predicted exactly once."""
    config = config or RollingConfig()
    train_days = 7 * config.train_weeks
    test_days = 7 * config.test_weeks
    horizon = config.forecast_horizon or test_days
    horizon = min(horizon, test_days)
    n = len(panel)
    if n < train_days + test_days:
        raise RangeError(
            f"panel of {n} days is shorter than train+test = {train_days + test_days}")

    windows = []
    preds_u, preds_c, idx_all = [], [], []
    bundle = None
    start = 0
    while start + train_days + test_days <= n:
        train_slice = panel.slice(start, start + train_days)
        result = joint_train(train_slice, demographics, config.joint,
                             warm_bundle=bundle if config.warm_start else None)
        bundle = result.bundle
        test_start = start + train_days
        init = sim_state_from_panel(panel.slice(start, test_start), bundle, train_days)
        traj = iterate(bundle, init, horizon,
                       panel.policy[test_start:test_start + horizon],
                       panel.blm[test_start:test_start + horizon])
        windows.append(WindowForecast(start, test_start, traj))
        preds_u.append(traj.unemployment)
        preds_c.append(traj.cum_confirmed)
        idx_all.append(np.arange(test_start, test_start + horizon))
        start += test_days

    pred_u = np.concatenate(preds_u)
    pred_c = np.concatenate(preds_c)
    idx = np.concatenate(idx_all)
    truth_u = panel.unemployment[idx]
    truth_c = panel.cum_confirmed[idx]
    metrics = {
        "unemployment": compute_metrics(pred_u, truth_u),
        "cum_confirmed": compute_metrics(pred_c, truth_c),
    }
    return RollingResult(windows, pred_u, pred_c, truth_u, truth_c, idx, metrics)
