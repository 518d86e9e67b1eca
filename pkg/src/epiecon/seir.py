"""Discrete-time SEIR compartment dynamics with a time-varying effective
infection rate, incubation-delay mapping between infections and
confirmations, and the effective reproduction number.

Compartments are population fractions (the population is normalized to 1 and
the transmission rate absorbs the scale); counts are recovered by multiplying
by the population size. One step is one day.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, StabilityError

INCUBATION_MAX_DAYS = 21


@dataclass(frozen=True)
class CompartmentState:
    S: float
    E: float
    I: float
    R: float

    def __post_init__(self):
        for name in "SEIR":
            v = getattr(self, name)
            if not -1e-12 <= v <= 1.0 + 1e-12:
                raise DomainError(f"compartment {name}={v} outside [0, 1]")
        total = self.S + self.E + self.I + self.R
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"compartments must sum to 1, got {total}")

    def as_tuple(self):
        return (self.S, self.E, self.I, self.R)


@dataclass(frozen=True)
class SeirParams:
    beta: float   # transmission rate per day
    alpha: float  # incidence rate of the exposed per day (1 / incubation)
    gamma: float  # removal rate of the infectious per day

    def __post_init__(self):
        if not (self.beta > 0 and self.alpha > 0 and self.gamma > 0):
            raise DomainError("SEIR rates must be positive")
        if self.alpha > 1 or self.gamma > 1:
            raise DomainError("alpha and gamma are daily probabilities, must be <= 1")


def seir_step(state: CompartmentState, params: SeirParams, r_t: float) -> CompartmentState:
    """One day of the difference equations with effective transmission
    r_t * beta:

        S' = S - r*beta*S*I
        E' = E + r*beta*S*I - alpha*E
        I' = I + alpha*E - gamma*I
        R' = R + gamma*I
    """
    if not math.isfinite(r_t) or r_t < 0:
        raise DomainError(f"infection rate multiplier must be finite and >= 0, got {r_t}")
    new_exposed = r_t * params.beta * state.S * state.I
    S = state.S - new_exposed
    E = state.E + new_exposed - params.alpha * state.E
    I = state.I + params.alpha * state.E - params.gamma * state.I
    R = state.R + params.gamma * state.I
    for name, v in (("S", S), ("E", E), ("I", I), ("R", R)):
        if not -1e-12 <= v <= 1.0 + 1e-12:
            raise StabilityError(
                f"compartment {name}={v} left [0, 1]; step size or parameters unstable",
                last_state=state)
    return CompartmentState(S, E, I, R)


def run_seir(state: CompartmentState, params: SeirParams, r_path) -> list[CompartmentState]:
    """Chain seir_step along a per-day infection-rate path; returns the
    initial state followed by one state per step."""
    states = [state]
    for r_t in r_path:
        state = seir_step(state, params, float(r_t))
        states.append(state)
    return states


def effective_R(state: CompartmentState, params: SeirParams, r_t: float) -> float:
    """Next-generation reproduction number with time-varying transmission:
    R_t = r_t * beta * S_t / gamma."""
    return r_t * params.beta * state.S / params.gamma


def daily_new_infections(cum_confirmed: float, cum_removed: float, r_hat: float) -> float:
    """Infections implied by the current active pool: active * r_hat, where
    active = cumulative confirmed - cumulative removed. Negative active counts
    (data noise) clip to zero."""
    active = cum_confirmed - cum_removed
    if active < 0:
        active = 0.0
    return active * r_hat


# --- incubation delay --------------------------------------------------------


@dataclass(frozen=True)
class IncubationDist:
    """Weibull incubation-period distribution, measured in days.

    Defaults give a mean of about 7 days.
    """

    shape: float = 2.0
    scale: float = 7.9

    def __post_init__(self):
        if self.shape <= 0 or self.scale <= 0:
            raise DomainError("Weibull shape and scale must be positive")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, 1.0 - np.exp(-np.clip(x / self.scale, 0, None) ** self.shape), 0.0)

    def day_probabilities(self) -> np.ndarray:
        """Daily mass p_k = F(k) - F(k-1) for k = 1..21, renormalized so the
        truncated distribution sums to 1."""
        ks = np.arange(0, INCUBATION_MAX_DAYS + 1, dtype=float)
        cdf = self.cdf(ks)
        mass = np.diff(cdf)
        return mass / mass.sum()

    def clamped_day_probabilities(self) -> np.ndarray:
        """Daily mass of the sampled (ceil + clamp) distribution: identical to
        the CDF differences for k < 21, with all tail mass assigned to day 21."""
        probs = np.diff(self.cdf(np.arange(0, INCUBATION_MAX_DAYS + 1, dtype=float)))
        probs[-1] += 1.0 - self.cdf(np.array(INCUBATION_MAX_DAYS))
        return probs

    def mean_sampled_days(self) -> float:
        """Analytic mean of sample_incubation's integer-day distribution."""
        probs = self.clamped_day_probabilities()
        return float(np.arange(1, INCUBATION_MAX_DAYS + 1) @ probs)

    def mean_days(self) -> float:
        """Mean of the renormalized expected-mode distribution."""
        probs = self.day_probabilities()
        return float(np.arange(1, INCUBATION_MAX_DAYS + 1) @ probs)


def sample_incubation(dist: IncubationDist, rng: np.random.Generator, size=None):
    """Integer incubation days via inverse-CDF sampling, ceiled and clamped to
    [1, 21]."""
    u = rng.random(size)
    draws = dist.scale * (-np.log1p(-u)) ** (1.0 / dist.shape)
    days = np.ceil(draws)
    days = np.clip(days, 1, INCUBATION_MAX_DAYS)
    if size is None:
        return int(days)
    return days.astype(int)


def incubation_map(infections, dist: IncubationDist, mode: str = "expected",
                   rng: np.random.Generator | None = None) -> np.ndarray:
    """Spread daily infections onto future confirmation days.

    Expected mode convolves with the renormalized daily Weibull mass, so total
    mass is conserved exactly; sampled mode draws an integer delay per
    infected individual. Output covers len(infections) + 21 days so nothing is
    truncated.
    """
    infections = np.asarray(infections, dtype=float)
    if np.any(infections < 0):
        raise DomainError("infection counts must be nonnegative")
    T = len(infections)
    out = np.zeros(T + INCUBATION_MAX_DAYS)
    if mode == "expected":
        probs = dist.day_probabilities()
        for t in range(T):
            if infections[t] > 0:
                out[t + 1:t + 1 + INCUBATION_MAX_DAYS] += infections[t] * probs
    elif mode == "sampled":
        if rng is None:
            raise DomainError("sampled mode requires a random generator")
        for t in range(T):
            n = int(round(infections[t]))
            if n > 0:
                delays = sample_incubation(dist, rng, size=n)
                counts = np.bincount(delays, minlength=INCUBATION_MAX_DAYS + 1)
                out[t + 1:t + 1 + INCUBATION_MAX_DAYS] += counts[1:]
    else:
        raise DomainError(f"unknown incubation mode {mode!r}")
    return out


def infer_true_infection_rate(new_confirmed, cum_confirmed, cum_removed,
                              dist: IncubationDist) -> np.ndarray:
    """Training target for the infection-rate forecaster.

    Daily infections are estimated by shifting confirmations back by the
    rounded mean incubation delay, then divided by the active pool. The last
    `shift` days have no observable confirmations and are excluded: the
    returned series has length T - shift. Days with an empty active pool carry
    the previous day's rate forward.
    """
    new_confirmed = np.asarray(new_confirmed, dtype=float)
    cum_confirmed = np.asarray(cum_confirmed, dtype=float)
    cum_removed = np.asarray(cum_removed, dtype=float)
    T = len(new_confirmed)
    shift = int(round(dist.mean_days()))
    if T <= shift:
        raise DomainError(
            f"series of {T} days too short: need more than the {shift}-day mean incubation")
    active = np.maximum(cum_confirmed - cum_removed, 0.0)
    rates = np.zeros(T - shift)
    prev = 0.0
    for t in range(T - shift):
        infections = new_confirmed[t + shift]
        if active[t] > 0:
            prev = max(infections / active[t], 0.0)
        rates[t] = prev
    return rates
