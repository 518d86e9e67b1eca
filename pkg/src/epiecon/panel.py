"""Data ingestion: parse the five public sources, build the protest-intensity
index, smooth and align everything into a single daily national panel.

Sources and their documented CSV layouts are described in the README. All
values end up in a columnar :class:`Panel` whose rows are consecutive calendar
days with no gaps.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .errors import DataFormatError, DateOrderError, DomainError, RangeError

MOBILITY_CATEGORIES = [
    "retail_and_recreation",
    "grocery_and_pharmacy",
    "parks",
    "transit_stations",
    "workplaces",
    "residential",
]

MOBILITY_CSV_COLUMNS = [f"{c}_percent_change_from_baseline" for c in MOBILITY_CATEGORIES]

# Policy indicators in their canonical order: the eight containment/closure
# levers C1..C8 first, then the six other bounded indicators. Each entry is
# (column name, max ordinal value, has binary scope flag).
POLICY_INDICATORS = [
    ("c1_school_closing", 3, True),
    ("c2_workplace_closing", 3, True),
    ("c3_cancel_public_events", 2, True),
    ("c4_restrictions_on_gatherings", 4, True),
    ("c5_close_public_transport", 2, True),
    ("c6_stay_at_home_requirements", 3, True),
    ("c7_internal_movement_restrictions", 2, True),
    ("c8_international_travel_controls", 4, False),
    ("e1_income_support", 2, True),
    ("e2_debt_contract_relief", 2, False),
    ("h1_public_information_campaigns", 2, True),
    ("h2_testing_policy", 3, False),
    ("h3_contact_tracing", 2, False),
    ("h6_facial_coverings", 4, True),
]

N_POLICIES = len(POLICY_INDICATORS)
N_CONTAINMENT = 8  # C1..C8 are the reopening levers
RESIDENTIAL = 5  # index of the residential mobility category

SMOOTH_WINDOW = 7  # current day plus the past six days


@dataclass(frozen=True)
class Demographics:
    """National demographic controls (constant vector for single-region runs)."""

    pop_density: float
    population: float
    gini: float
    share_65_plus: float
    gdp_per_capita: float

    def __post_init__(self):
        for name in ("pop_density", "population", "gini", "share_65_plus", "gdp_per_capita"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise DomainError(f"demographics field {name!r} must be finite and positive, got {v}")
        for name in ("gini", "share_65_plus"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"demographics field {name!r} must lie in [0, 1], got {v}")

    def as_vector(self) -> np.ndarray:
        return np.array(
            [self.pop_density, self.population, self.gini, self.share_65_plus, self.gdp_per_capita],
            dtype=float,
        )


@dataclass(frozen=True)
class ProtestRecord:
    date: date
    city: str
    state: str
    attendance: float

    def __post_init__(self):
        if self.attendance < 0:
            raise DomainError(f"protest attendance must be >= 0, got {self.attendance}")
        if len(self.state) != 2 or not self.state.isalpha():
            raise DomainError(f"state must be a two-letter code, got {self.state!r}")


@dataclass(frozen=True)
class StateEpiRecord:
    date: date
    state: str
    new_confirmed: float
    new_recovered: float
    new_dead: float

    def __post_init__(self):
        for name in ("new_confirmed", "new_recovered", "new_dead"):
            if getattr(self, name) < 0:
                raise DomainError(f"state epi count {name} must be >= 0")


@dataclass
class DailySeries:
    """A date-indexed block of values with one row per (not necessarily
    consecutive) day, sorted ascending."""

    dates: list[date]
    values: np.ndarray  # (T,) or (T, k)

    def __post_init__(self):
        if len(self.dates) != len(self.values):
            raise DataFormatError("dates and values length mismatch")
        for a, b in zip(self.dates, self.dates[1:]):
            if b <= a:
                raise DateOrderError(f"dates not strictly increasing: {a} then {b}")


@dataclass
class RawBundle:
    """Per-source series at source-native frequency, plus a rejected-row report."""

    mobility: DailySeries  # (T, 6) percent deviations
    policy: DailySeries  # (T, 14) normalized [0, 1]
    claims: list[tuple[date, float]]  # weekly insured unemployment rate, percent
    epi: DailySeries  # (T, 3) new confirmed / recovered / dead
    state_epi: list[StateEpiRecord]
    protests: list[ProtestRecord]
    rejected: dict[str, int] = field(default_factory=dict)


class Panel:
    """Date-aligned national daily panel.

    Columns: raw and smoothed 6-dim mobility, daily unemployment rate
    (percent), national epi counts, smoothed 14-dim policy index, smoothed
    protest-intensity index, and cumulative confirmed/removed counts
    (carry-in from pre-panel epi history included).
    """

    def __init__(self, dates, mobility_raw, mobility_smooth, unemployment,
                 new_confirmed, new_recovered, new_dead, policy, blm,
                 cum_confirmed, cum_removed):
        self.dates = list(dates)
        self.mobility_raw = np.asarray(mobility_raw, dtype=float)
        self.mobility_smooth = np.asarray(mobility_smooth, dtype=float)
        self.unemployment = np.asarray(unemployment, dtype=float)
        self.new_confirmed = np.asarray(new_confirmed, dtype=float)
        self.new_recovered = np.asarray(new_recovered, dtype=float)
        self.new_dead = np.asarray(new_dead, dtype=float)
        self.policy = np.asarray(policy, dtype=float)
        self.blm = np.asarray(blm, dtype=float)
        self.cum_confirmed = np.asarray(cum_confirmed, dtype=float)
        self.cum_removed = np.asarray(cum_removed, dtype=float)
        self.validate()

    def __len__(self):
        return len(self.dates)

    def validate(self):
        n = len(self.dates)
        for name in ("mobility_raw", "mobility_smooth", "unemployment", "new_confirmed",
                     "new_recovered", "new_dead", "policy", "blm", "cum_confirmed", "cum_removed"):
            if len(getattr(self, name)) != n:
                raise DataFormatError(f"panel column {name} has wrong length")
        for a, b in zip(self.dates, self.dates[1:]):
            if (b - a).days != 1:
                raise DateOrderError(f"panel dates must be consecutive days: {a} then {b}")
        if self.mobility_raw.shape != (n, 6) or self.mobility_smooth.shape != (n, 6):
            raise DataFormatError("mobility blocks must be (T, 6)")
        if self.policy.shape != (n, N_POLICIES):
            raise DataFormatError(f"policy block must be (T, {N_POLICIES})")
        if np.any(self.policy < -1e-12) or np.any(self.policy > 1 + 1e-12):
            raise DomainError("policy components must lie in [0, 1]")
        if np.any(self.blm < -1e-12) or np.any(self.blm > 1 + 1e-12):
            raise DomainError("protest index must lie in [0, 1]")
        for name in ("new_confirmed", "new_recovered", "new_dead"):
            if np.any(getattr(self, name) < 0):
                raise DomainError(f"{name} must be nonnegative")
        # cumulative recursion: cum(t) = cum(t-1) + new(t)
        if n > 1:
            if not np.allclose(np.diff(self.cum_confirmed), self.new_confirmed[1:], atol=1e-6):
                raise DomainError("cum_confirmed does not accumulate new_confirmed")
            removed_new = self.new_recovered[1:] + self.new_dead[1:]
            if not np.allclose(np.diff(self.cum_removed), removed_new, atol=1e-6):
                raise DomainError("cum_removed does not accumulate recovered + dead")

    def active_cases(self) -> np.ndarray:
        """Currently active confirmed cases (cumulative confirmed minus removed)."""
        return self.cum_confirmed - self.cum_removed

    def index_of(self, when: date) -> int:
        offset = (when - self.dates[0]).days
        if offset < 0 or offset >= len(self.dates):
            raise RangeError(f"date {when} outside panel range {self.dates[0]}..{self.dates[-1]}")
        return offset

    def slice(self, start: int, stop: int) -> "Panel":
        return Panel(
            self.dates[start:stop],
            self.mobility_raw[start:stop],
            self.mobility_smooth[start:stop],
            self.unemployment[start:stop],
            self.new_confirmed[start:stop],
            self.new_recovered[start:stop],
            self.new_dead[start:stop],
            self.policy[start:stop],
            self.blm[start:stop],
            self.cum_confirmed[start:stop],
            self.cum_removed[start:stop],
        )

    # --- persistence -------------------------------------------------------

    CSV_COLUMNS = (
        ["date"]
        + [f"mobility_raw_{i}" for i in range(6)]
        + [f"mobility_smooth_{i}" for i in range(6)]
        + ["unemployment", "new_confirmed", "new_recovered", "new_dead"]
        + [f"policy_{i}" for i in range(N_POLICIES)]
        + ["blm", "cum_confirmed", "cum_removed"]
    )

    def save_csv(self, path):
        """Write the panel; floats use shortest round-trip repr so that
        load(save(panel)) is bitwise identical."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.CSV_COLUMNS)
            for t, d in enumerate(self.dates):
                row = [d.isoformat()]
                row += [repr(v) for v in self.mobility_raw[t].tolist()]
                row += [repr(v) for v in self.mobility_smooth[t].tolist()]
                row += [repr(float(self.unemployment[t])), repr(float(self.new_confirmed[t])),
                        repr(float(self.new_recovered[t])), repr(float(self.new_dead[t]))]
                row += [repr(v) for v in self.policy[t].tolist()]
                row += [repr(float(self.blm[t])), repr(float(self.cum_confirmed[t])),
                        repr(float(self.cum_removed[t]))]
                writer.writerow(row)

    @classmethod
    def load_csv(cls, path) -> "Panel":
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            _require_columns(reader.fieldnames, cls.CSV_COLUMNS, str(path))
            dates, rows = [], []
            for rec in reader:
                dates.append(_parse_date(rec["date"]))
                rows.append([float(rec[c]) for c in cls.CSV_COLUMNS[1:]])
        data = np.array(rows, dtype=float)
        return cls(
            dates,
            data[:, 0:6],
            data[:, 6:12],
            data[:, 12],
            data[:, 13],
            data[:, 14],
            data[:, 15],
            data[:, 16:16 + N_POLICIES],
            data[:, 16 + N_POLICIES],
            data[:, 17 + N_POLICIES],
            data[:, 18 + N_POLICIES],
        )


# --- elementary series operations ------------------------------------------


def smooth_trailing7(series) -> np.ndarray:
    """Trailing 7-day mean: out[t] = mean(in[max(0, t-6)..t]).

    The first six entries average over the available prefix instead of being
    dropped, so output length equals input length. Works on (T,) or (T, k).
    """
    arr = np.asarray(series, dtype=float)
    if arr.size == 0:
        raise DomainError("cannot smooth an empty series")
    csum = np.cumsum(arr, axis=0)
    out = np.empty_like(arr, dtype=float)
    t = np.arange(len(arr))
    lo = np.maximum(t - (SMOOTH_WINDOW - 1), 0)
    width = (t - lo + 1).astype(float)
    if arr.ndim == 1:
        out = (csum - np.where(lo > 0, csum[lo - 1], 0.0)) / width
    else:
        base = np.where((lo > 0)[:, None], csum[np.maximum(lo - 1, 0)], 0.0)
        out = (csum - base) / width[:, None]
    return out


def interpolate_weekly_to_daily(knots: list[tuple[date, float]]) -> DailySeries:
    """Piecewise-linear daily values between the first and last knot,
    exact at the knots."""
    if len(knots) < 2:
        raise DomainError("need at least two weekly points to interpolate")
    for (a, _), (b, _) in zip(knots, knots[1:]):
        if b == a:
            raise DateOrderError(f"duplicate knot date {a}")
        if b < a:
            raise DateOrderError(f"knot dates not increasing: {a} then {b}")
    start, end = knots[0][0], knots[-1][0]
    days = [start + timedelta(days=i) for i in range((end - start).days + 1)]
    xs = np.array([(k[0] - start).days for k in knots], dtype=float)
    ys = np.array([k[1] for k in knots], dtype=float)
    values = np.interp(np.arange(len(days), dtype=float), xs, ys)
    return DailySeries(days, values)


def minmax_normalize(series) -> np.ndarray:
    """Max-min rescale to [0, 1]; a constant series maps to all zeros."""
    arr = np.asarray(series, dtype=float)
    lo, hi = arr.min(), arr.max()
    if hi - lo <= 0:
        return np.zeros_like(arr)
    return (arr - lo) / (hi - lo)


def compute_blm_index(protests: list[ProtestRecord], state_epi: list[StateEpiRecord],
                      smooth: bool = True) -> DailySeries:
    """National daily protest-intensity index in [0, 1].

    Per day, city attendances sum to a state total; state totals are combined
    with weights equal to each state's share of active cases (cumulative
    confirmed minus recovered minus dead). Days where total active cases are
    zero fall back to uniform state weights (degenerate only pre-outbreak).
    The weighted series is max-min normalized and, by default, smoothed with
    the trailing 7-day mean.
    """
    if not state_epi:
        if protests:
            raise DomainError("protest records supplied without state epi data")
        return DailySeries([], np.zeros(0))

    epi_dates = sorted({r.date for r in state_epi})
    start, end = epi_dates[0], epi_dates[-1]
    days = [start + timedelta(days=i) for i in range((end - start).days + 1)]
    day_index = {d: i for i, d in enumerate(days)}
    states = sorted({r.state for r in state_epi})
    state_index = {s: i for i, s in enumerate(states)}

    for p in protests:
        if p.date not in day_index:
            raise DomainError(f"protest on {p.date} not covered by state epi dates")

    # active cases per state per day: cumulative net of daily increments
    net_new = np.zeros((len(days), len(states)))
    for r in state_epi:
        net_new[day_index[r.date], state_index[r.state]] += (
            r.new_confirmed - r.new_recovered - r.new_dead
        )
    active = np.cumsum(net_new, axis=0)

    state_attendance = np.zeros((len(days), len(states)))
    for p in protests:
        state_attendance[day_index[p.date], state_index[p.state]] += p.attendance

    raw = np.zeros(len(days))
    for t in range(len(days)):
        total_active = active[t].sum()
        if total_active > 0:
            weights = active[t] / total_active
        else:
            weights = np.full(len(states), 1.0 / len(states))
        raw[t] = float(weights @ state_attendance[t])

    out = minmax_normalize(raw)
    if smooth:
        out = smooth_trailing7(out)
    return DailySeries(days, out)


# --- source parsing ----------------------------------------------------------


def _parse_date(text: str) -> date:
    try:
        return date.fromisoformat(text.strip())
    except ValueError as exc:
        raise DataFormatError(f"unparseable date {text!r}") from exc


def _require_columns(fieldnames, required, source):
    have = set(fieldnames or [])
    for col in required:
        if col not in have:
            raise DataFormatError(f"{source}: missing required column {col!r}")


def _check_monotone(dates, source):
    for a, b in zip(dates, dates[1:]):
        if b <= a:
            raise DateOrderError(f"{source}: dates not strictly increasing ({a} then {b})")


def read_mobility_csv(path, country_code: str = "US") -> tuple[DailySeries, int]:
    """Parse the community-mobility CSV (6 percent-deviation categories)."""
    rejected = 0
    dates, rows = [], []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, ["country_region_code", "date"] + MOBILITY_CSV_COLUMNS, str(path))
        for rec in reader:
            if rec["country_region_code"].strip() != country_code:
                continue
            try:
                d = _parse_date(rec["date"])
                vals = [float(rec[c]) for c in MOBILITY_CSV_COLUMNS]
            except (DataFormatError, ValueError):
                rejected += 1
                continue
            dates.append(d)
            rows.append(vals)
    _check_monotone(dates, str(path))
    return DailySeries(dates, np.array(rows, dtype=float).reshape(len(dates), 6)), rejected


def normalize_policy_value(ordinal: float, max_value: int, has_flag: bool, flag: float) -> float:
    """Map a raw policy ordinal to [0, 1] with the tracker's flag adjustment:
    (v - 0.5*(F - f)) / N for v > 0, and 0 otherwise."""
    if ordinal <= 0:
        return 0.0
    f = 1.0 if flag else 0.0
    value = (ordinal - 0.5 * ((1.0 if has_flag else 0.0) - (f if has_flag else 0.0))) / max_value
    return float(min(max(value, 0.0), 1.0))


def read_policy_csv(path) -> tuple[DailySeries, int]:
    """Parse the government-response CSV: 14 ordinal indicators plus their
    scope flags, normalized to [0, 1] per indicator."""
    required = ["date"] + [name for name, _, _ in POLICY_INDICATORS]
    rejected = 0
    dates, rows = [], []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, required, str(path))
        for rec in reader:
            try:
                d = _parse_date(rec["date"])
                vals = []
                for name, max_value, has_flag in POLICY_INDICATORS:
                    ordinal = float(rec[name]) if rec[name].strip() != "" else 0.0
                    flag = 0.0
                    if has_flag:
                        flag_col = name.split("_")[0] + "_flag"
                        raw_flag = rec.get(flag_col, "")
                        flag = float(raw_flag) if raw_flag and raw_flag.strip() != "" else 0.0
                    vals.append(normalize_policy_value(ordinal, max_value, has_flag, flag))
            except (DataFormatError, ValueError):
                rejected += 1
                continue
            dates.append(d)
            rows.append(vals)
    _check_monotone(dates, str(path))
    return DailySeries(dates, np.array(rows, dtype=float).reshape(len(dates), N_POLICIES)), rejected


def read_claims_csv(path) -> tuple[list[tuple[date, float]], int]:
    rejected = 0
    knots = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, ["week_ending_date", "insured_unemployment_rate"], str(path))
        for rec in reader:
            try:
                knots.append((_parse_date(rec["week_ending_date"]), float(rec["insured_unemployment_rate"])))
            except (DataFormatError, ValueError):
                rejected += 1
    _check_monotone([k[0] for k in knots], str(path))
    return knots, rejected


def read_epi_csv(path) -> tuple[DailySeries, int]:
    rejected = 0
    dates, rows = [], []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, ["date", "new_confirmed", "new_recovered", "new_dead"], str(path))
        for rec in reader:
            try:
                d = _parse_date(rec["date"])
                vals = [float(rec["new_confirmed"]), float(rec["new_recovered"]), float(rec["new_dead"])]
                if any(v < 0 for v in vals):
                    raise ValueError("negative count")
            except (DataFormatError, ValueError):
                rejected += 1
                continue
            dates.append(d)
            rows.append(vals)
    _check_monotone(dates, str(path))
    return DailySeries(dates, np.array(rows, dtype=float).reshape(len(dates), 3)), rejected


def read_state_epi_csv(path) -> tuple[list[StateEpiRecord], int]:
    rejected = 0
    records = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, ["date", "state", "new_confirmed", "new_recovered", "new_dead"], str(path))
        for rec in reader:
            try:
                records.append(StateEpiRecord(
                    _parse_date(rec["date"]), rec["state"].strip(),
                    float(rec["new_confirmed"]), float(rec["new_recovered"]), float(rec["new_dead"]),
                ))
            except (DataFormatError, DomainError, ValueError):
                rejected += 1
    return records, rejected


def read_protest_csv(path) -> tuple[list[ProtestRecord], int]:
    rejected = 0
    records = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, ["date", "city", "state", "attendance"], str(path))
        for rec in reader:
            try:
                records.append(ProtestRecord(
                    _parse_date(rec["date"]), rec["city"].strip(), rec["state"].strip(),
                    float(rec["attendance"]),
                ))
            except (DataFormatError, DomainError, ValueError):
                rejected += 1
    return records, rejected


def read_demographics_json(path) -> Demographics:
    with Path(path).open() as fh:
        data = json.load(fh)
    fields = ("pop_density", "population", "gini", "share_65_plus", "gdp_per_capita")
    missing = [f for f in fields if f not in data]
    if missing:
        raise DataFormatError(f"{path}: demographics JSON missing fields {missing}")
    return Demographics(**{f: float(data[f]) for f in fields})


def ingest_sources(mobility_csv, oxford_csv, claims_csv, epi_csv, state_epi_csv,
                   demographics_json, protest_csv, country_code: str = "US"
                   ) -> tuple[RawBundle, Demographics]:
    """Parse every source file into a :class:`RawBundle` at source-native
    frequency, with a per-source rejected-row count report."""
    mobility, rej_m = read_mobility_csv(mobility_csv, country_code)
    policy, rej_p = read_policy_csv(oxford_csv)
    claims, rej_c = read_claims_csv(claims_csv)
    epi, rej_e = read_epi_csv(epi_csv)
    state_epi, rej_s = read_state_epi_csv(state_epi_csv)
    protests, rej_b = read_protest_csv(protest_csv)
    demographics = read_demographics_json(demographics_json)
    bundle = RawBundle(
        mobility=mobility, policy=policy, claims=claims, epi=epi,
        state_epi=state_epi, protests=protests,
        rejected={"mobility": rej_m, "policy": rej_p, "claims": rej_c,
                  "epi": rej_e, "state_epi": rej_s, "protests": rej_b},
    )
    return bundle, demographics


# --- panel assembly ----------------------------------------------------------

MAX_FFILL_DAYS = 3  # gaps longer than this are a data error


def _to_dense_daily(series: DailySeries, start: date, end: date, source: str) -> np.ndarray:
    """Restrict a daily series to [start, end], forward-filling gaps of at
    most MAX_FFILL_DAYS days."""
    width = series.values.shape[1] if series.values.ndim > 1 else 1
    n = (end - start).days + 1
    out = np.full((n, width), np.nan)
    lookup = {d: i for i, d in enumerate(series.dates)}
    for i in range(n):
        d = start + timedelta(days=i)
        if d in lookup:
            out[i] = np.atleast_1d(series.values[lookup[d]])
    gap = 0
    for i in range(n):
        if np.isnan(out[i]).any():
            gap += 1
            if i == 0 or gap > MAX_FFILL_DAYS:
                raise RangeError(f"{source}: gap of more than {MAX_FFILL_DAYS} days inside the panel range")
            out[i] = out[i - 1]
        else:
            gap = 0
    return out if series.values.ndim > 1 else out[:, 0]


def build_panel(bundle: RawBundle, demographics: Demographics) -> tuple[Panel, Demographics]:
    """Intersect all daily sources onto one consecutive date range and derive
    the smoothed/interpolated/cumulative columns."""
    unemployment = interpolate_weekly_to_daily(bundle.claims)
    blm = compute_blm_index(bundle.protests, bundle.state_epi)

    spans = [
        (bundle.mobility.dates[0], bundle.mobility.dates[-1]),
        (bundle.policy.dates[0], bundle.policy.dates[-1]),
        (bundle.epi.dates[0], bundle.epi.dates[-1]),
        (unemployment.dates[0], unemployment.dates[-1]),
    ]
    start = max(s for s, _ in spans)
    end = min(e for _, e in spans)
    if end < start:
        raise RangeError(f"sources do not overlap: computed range {start}..{end}")
    dates = [start + timedelta(days=i) for i in range((end - start).days + 1)]

    mobility_raw = _to_dense_daily(bundle.mobility, start, end, "mobility")
    policy_raw = _to_dense_daily(bundle.policy, start, end, "policy")
    epi = _to_dense_daily(bundle.epi, start, end, "epi")
    u_daily = _to_dense_daily(unemployment, start, end, "claims")

    if len(blm.dates):
        blm_daily = np.zeros(len(dates))
        lookup = {d: i for i, d in enumerate(blm.dates)}
        for i, d in enumerate(dates):
            if d in lookup:
                blm_daily[i] = blm.values[lookup[d]]
    else:
        blm_daily = np.zeros(len(dates))

    # cumulative counts carry in any epi history before the panel start
    carry_c = carry_r = 0.0
    for d, row in zip(bundle.epi.dates, bundle.epi.values):
        if d < start:
            carry_c += row[0]
            carry_r += row[1] + row[2]
    cum_confirmed = carry_c + np.cumsum(epi[:, 0])
    cum_removed = carry_r + np.cumsum(epi[:, 1] + epi[:, 2])

    panel = Panel(
        dates=dates,
        mobility_raw=mobility_raw,
        mobility_smooth=smooth_trailing7(mobility_raw),
        unemployment=u_daily,
        new_confirmed=epi[:, 0],
        new_recovered=epi[:, 1],
        new_dead=epi[:, 2],
        policy=smooth_trailing7(policy_raw),
        blm=blm_daily,
        cum_confirmed=cum_confirmed,
        cum_removed=cum_removed,
    )
    return panel, demographics
