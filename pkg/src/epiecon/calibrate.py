"""SEIR parameter calibration: a from-scratch Nelder-Mead simplex solver and
the squared-error fit of (beta, alpha, gamma, E0) against observed cumulative
confirmed and removed fractions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .seir import CompartmentState, SeirParams


@dataclass
class NelderMeadConfig:
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    tolerance: float = 1e-15   # max function-value spread across the simplex
    x_tolerance: float = 1e-8  # max coordinate spread; both must collapse
    max_iter: int = 2000
    initial_step: float = 0.05  # relative simplex displacement per coordinate


@dataclass
class NelderMeadResult:
    x: np.ndarray
    fval: float
    iterations: int
    converged: bool


def nelder_mead(objective, x0, config: NelderMeadConfig | None = None) -> NelderMeadResult:
    """Classic simplex descent. NaN objective values are treated as +inf so
    bound penalties and unstable regions are never selected."""
    config = config or NelderMeadConfig()

    def f(x):
        value = objective(x)
        if value is None or math.isnan(value):
            return math.inf
        return float(value)

    x0 = np.asarray(x0, dtype=float)
    f0 = f(x0)
    if not math.isfinite(f0):
        raise DomainError("objective must be finite at the starting point")

    n = len(x0)
    simplex = [x0]
    for i in range(n):
        step = np.zeros(n)
        step[i] = config.initial_step * abs(x0[i]) if x0[i] != 0 else config.initial_step * 0.005
        simplex.append(x0 + step)
    values = [f0] + [f(x) for x in simplex[1:]]

    iterations = 0
    converged = False
    while iterations < config.max_iter:
        order = np.argsort(values)
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        if all(math.isfinite(v) for v in values):
            f_spread = max(values) - min(values)
            x_spread = max(float(np.max(np.abs(x - simplex[0]))) for x in simplex[1:])
            if f_spread < config.tolerance and x_spread < config.x_tolerance:
                converged = True
                break
        iterations += 1

        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]
        xr = centroid + config.reflection * (centroid - worst)
        fr = f(xr)
        if values[0] <= fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[0]:
            xe = centroid + config.expansion * (xr - centroid)
            fe = f(xe)
            if fe < fr:
                simplex[-1], values[-1] = xe, fe
            else:
                simplex[-1], values[-1] = xr, fr
            continue
        # contraction (outside if the reflection improved on the worst point)
        if fr < values[-1]:
            xc = centroid + config.contraction * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                simplex[-1], values[-1] = xc, fc
                continue
        else:
            xc = centroid + config.contraction * (worst - centroid)
            fc = f(xc)
            if fc < values[-1]:
                simplex[-1], values[-1] = xc, fc
                continue
        # shrink toward the best vertex
        best = simplex[0]
        for i in range(1, n + 1):
            simplex[i] = best + config.shrink * (simplex[i] - best)
            values[i] = f(simplex[i])

    order = np.argsort(values)
    best_x = simplex[order[0]]
    best_f = values[order[0]]
    return NelderMeadResult(np.asarray(best_x, dtype=float), float(best_f),
                            iterations, converged)


# --- SEIR fit ----------------------------------------------------------------

BETA_MAX = 2.0
ALPHA_MAX = 1.0
GAMMA_MAX = 1.0
E0_FACTOR = 10.0  # E0 search bound as a multiple of the initial infectious fraction


@dataclass
class CalibrationResult:
    params: SeirParams
    e0: float
    loss: float
    converged: bool
    iterations: int
    degenerate: bool = False
    loss_history: list = field(default_factory=list)

    def report(self) -> dict:
        return {
            "beta": self.params.beta,
            "alpha": self.params.alpha,
            "gamma": self.params.gamma,
            "e0": self.e0,
            "loss": self.loss,
            "converged": self.converged,
            "iterations": self.iterations,
            "degenerate": self.degenerate,
        }


def seir_fit_loss(beta, alpha, gamma, e0, cum_confirmed, cum_removed, r_path=None):
    """Mean squared error of (I_t + R_t) against cumulative confirmed and R_t
    against cumulative removed fractions, simulated from the observed initial
    condition. Returns +inf when the dynamics leave [0, 1]."""
    c_obs = cum_confirmed
    r_obs = cum_removed
    T = len(c_obs)
    i0 = c_obs[0] - r_obs[0]
    s = 1.0 - e0 - i0 - r_obs[0]
    e = e0
    i = i0
    r = r_obs[0]
    if s < 0:
        return math.inf
    loss = 0.0
    for t in range(1, T):
        r_t = 1.0 if r_path is None else r_path[t - 1]
        new_exposed = r_t * beta * s * i
        s, e, i, r = (s - new_exposed,
                      e + new_exposed - alpha * e,
                      i + alpha * e - gamma * i,
                      r + gamma * i)
        if not (0.0 <= s <= 1.0 and 0.0 <= e <= 1.0 and 0.0 <= i <= 1.0 and 0.0 <= r <= 1.0):
            return math.inf
        c_pred = i + r
        loss += (c_pred - c_obs[t]) ** 2 + (r - r_obs[t]) ** 2
    return loss / (T - 1)


def calibrate(cum_confirmed, cum_removed, r_path=None, x0=None,
              nm_config: NelderMeadConfig | None = None, restarts: int = 4,
              target_loss: float = 1e-14) -> CalibrationResult:
    """Fit (beta, alpha, gamma, E0) by Nelder-Mead with box-constraint
    penalties: beta in (0, 2], alpha and gamma in (0, 1], E0 in
    [0, 10 * I0]. Observations are fractions of the population; the infection
    rate multiplier is 1 during calibration unless an explicit path is given.

    Restarts re-seed the simplex at the incumbent until the loss target is
    hit; if the final solve never meets the simplex tolerance the result is
    flagged unconverged.
    """
    c_obs = np.asarray(cum_confirmed, dtype=float)
    r_obs = np.asarray(cum_removed, dtype=float)
    if len(c_obs) < 14:
        raise DomainError(f"need at least 14 observation days, got {len(c_obs)}")
    if len(c_obs) != len(r_obs):
        raise DomainError("confirmed and removed series must have equal length")
    if r_path is not None and len(r_path) < len(c_obs) - 1:
        raise DomainError("infection-rate path shorter than the observation window")

    i0 = c_obs[0] - r_obs[0]
    e0_max = E0_FACTOR * max(i0, 0.0)

    constant = bool(np.all(c_obs == c_obs[0]) and np.all(r_obs == r_obs[0]))
    if constant and i0 <= 0:
        # any rates fit a flat zero-infection history: unidentifiable
        return CalibrationResult(SeirParams(0.5, 0.2, 0.1), 0.0, 0.0,
                                 converged=True, iterations=0, degenerate=True)

    c_list = c_obs.tolist()
    r_list = r_obs.tolist()
    path_list = None if r_path is None else list(map(float, r_path))

    def objective(x):
        beta, alpha, gamma, e0 = x
        if not (0.0 < beta <= BETA_MAX and 0.0 < alpha <= ALPHA_MAX
                and 0.0 < gamma <= GAMMA_MAX and 0.0 <= e0 <= max(e0_max, 0.0)):
            return math.inf
        return seir_fit_loss(beta, alpha, gamma, e0, c_list, r_list, path_list)

    if x0 is None:
        x0 = np.array([0.5, 0.2, 0.1, min(2.0 * max(i0, 0.0), e0_max)])
    best = nelder_mead(objective, x0, nm_config)
    history = [best.fval]
    total_iters = best.iterations
    for _ in range(restarts):
        if best.fval <= target_loss:
            break
        nxt = nelder_mead(objective, best.x, nm_config)
        total_iters += nxt.iterations
        history.append(nxt.fval)
        if nxt.fval < best.fval:
            best = NelderMeadResult(nxt.x, nxt.fval, total_iters, nxt.converged)
        else:
            best = NelderMeadResult(best.x, best.fval, total_iters, nxt.converged)

    beta, alpha, gamma, e0 = best.x
    return CalibrationResult(
        SeirParams(float(beta), float(alpha), float(gamma)), float(e0), best.fval,
        converged=bool(best.converged or best.fval <= target_loss),
        iterations=total_iters, loss_history=history)


def initial_state(cum_confirmed_frac: float, cum_removed_frac: float, e0: float) -> CompartmentState:
    """Compartment state implied by observed cumulative fractions plus a
    fitted initial exposed pool."""
    i0 = max(cum_confirmed_frac - cum_removed_frac, 0.0)
    r0 = cum_removed_frac
    return CompartmentState(1.0 - e0 - i0 - r0, e0, i0, r0)
