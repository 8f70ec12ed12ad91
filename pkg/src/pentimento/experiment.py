"""Calibration / Condition / Measurement timelines and the three experiments."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import IO, Sequence, Union

import numpy as np

from .bti import (
    DEFAULT_PARAMS,
    Environment,
    ModelParams,
    Regime,
    RouteSpec,
    RouteBank,
    fresh,
    stress_scale,
)
from .tdc import SensorArray, SensorConfig, TDCSensor

STANDARD_LENGTHS_PS = (1000.0, 2000.0, 5000.0, 10000.0)
ROUTES_PER_LENGTH = 16
CLOUD_SPREAD_SIGMA = 0.2
FLEET_SEED = 0xF1EE7
FLEET_MARGIN_STEPS = 3


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class BurnVector:
    bits: tuple[int, ...]

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("burn bits must be 0 or 1")

    def __len__(self):
        return len(self.bits)

    @classmethod
    def random(cls, n: int, seed) -> BurnVector:
        rng = np.random.default_rng(seed)
        return cls(tuple(int(b) for b in rng.integers(0, 2, size=n)))

    def complement(self) -> BurnVector:
        return BurnVector(tuple(1 - b for b in self.bits))


@dataclass(frozen=True)
class Calibrate:
    pass


@dataclass(frozen=True)
class Measure:
    pass


@dataclass(frozen=True)
class Condition:
    source: str  # "X", "~X", "0" or "1"
    hours: float

    def __post_init__(self):
        if self.source not in ("X", "~X", "0", "1"):
            raise ScheduleError(f"unknown condition source {self.source!r}")
        if self.hours < 0:
            raise ScheduleError("condition hours must be >= 0")

    def values(self, burn: BurnVector) -> tuple[int, ...]:
        if self.source == "X":
            return burn.bits
        if self.source == "~X":
            return burn.complement().bits
        return (int(self.source),) * len(burn)


Phase = Union[Calibrate, Condition, Measure]


@dataclass(frozen=True)
class Schedule:
    phases: tuple[Phase, ...] = ()

    def __post_init__(self):
        if sum(isinstance(p, Calibrate) for p in self.phases) > 1:
            raise ScheduleError("at most one Calibrate phase is allowed")

    @property
    def total_hours(self) -> float:
        return float(sum(p.hours for p in self.phases if isinstance(p, Condition)))

    @property
    def calibrated(self) -> bool:
        return any(isinstance(p, Calibrate) for p in self.phases)

    def __add__(self, other: Schedule) -> Schedule:
        return Schedule(self.phases + other.phases)


def _steps(total_hours: float, hours_per_step: float) -> int:
    if hours_per_step <= 0:
        raise ScheduleError("hours_per_step must be > 0")
    return max(1, int(round(total_hours / hours_per_step)))


def experiment1(hours_per_step: float = 1.0, burn_hours=200.0, recover_hours=200.0) -> Schedule:
    """Lab burn-in with X then recovery with the complement, hourly readings."""
    phases: list[Phase] = [Calibrate(), Measure()]
    for _ in range(_steps(burn_hours, hours_per_step)):
        phases += [Condition("X", hours_per_step), Measure()]
    for _ in range(_steps(recover_hours, hours_per_step)):
        phases += [Condition("~X", hours_per_step), Measure()]
    return Schedule(tuple(phases))


def experiment2(hours_per_step: float = 1.0, burn_hours=200.0) -> Schedule:
    phases: list[Phase] = [Calibrate(), Measure()]
    for _ in range(_steps(burn_hours, hours_per_step)):
        phases += [Condition("X", hours_per_step), Measure()]
    return Schedule(tuple(phases))


def experiment3(hours_per_step: float = 1.0, victim_hours=200.0, window_hours=25.0) -> Schedule:
    """Victim burn without measurement, then attacker Measure/all-zero cycles."""
    phases: list[Phase] = [Condition("X", victim_hours)]
    for _ in range(_steps(window_hours, hours_per_step)):
        phases += [Measure(), Condition("0", hours_per_step)]
    return Schedule(tuple(phases))


PRESETS = {
    "experiment1": experiment1,
    "experiment2": experiment2,
    "experiment3": experiment3,
}


def standard_route_set(lengths_ps: Sequence[float] | None = None) -> list[RouteSpec]:
    """Routes with the given per-route nominal delays (default: 16 each of
    1000/2000/5000/10000 ps)."""
    if lengths_ps is None:
        lengths_ps = [L for L in STANDARD_LENGTHS_PS for _ in range(ROUTES_PER_LENGTH)]
    return [RouteSpec(f"r{i:02d}", float(L)) for i, L in enumerate(lengths_ps)]


@dataclass
class DelaySeries:
    route_ids: list[str]
    lengths_ps: np.ndarray  # (routes,)
    hours: np.ndarray  # (points,)
    delta_ps: np.ndarray  # (routes, points), first column zero

    def __len__(self):
        return len(self.hours)

    def window(self, start_hour: float) -> DelaySeries:
        """Points at or after ``start_hour``, re-centred on the first of them."""
        keep = self.hours >= start_hour - 1e-9
        d = self.delta_ps[:, keep]
        if d.shape[1]:
            d = d - d[:, :1]
        return DelaySeries(list(self.route_ids), self.lengths_ps.copy(), self.hours[keep], d)

    def until(self, end_hour: float) -> DelaySeries:
        """Points at or before ``end_hour`` (centring is unchanged)."""
        keep = self.hours <= end_hour + 1e-9
        return DelaySeries(list(self.route_ids), self.lengths_ps.copy(), self.hours[keep], self.delta_ps[:, keep])

    def subset(self, mask) -> DelaySeries:
        mask = np.asarray(mask, bool)
        ids = [r for r, m in zip(self.route_ids, mask) if m]
        return DelaySeries(ids, self.lengths_ps[mask], self.hours.copy(), self.delta_ps[mask])


def route_environments(env: Environment, n: int, seed) -> list[Environment]:
    """Per-route environments; cloud devices get a lognormal age spread."""
    if env.regime is not Regime.CLOUD:
        return [env] * n
    out = []
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    for child in ss.spawn(n):
        z = np.random.default_rng(child).standard_normal()
        factor = np.exp(CLOUD_SPREAD_SIGMA * z - CLOUD_SPREAD_SIGMA**2 / 2)
        age = float(min(env.device_age_factor * factor, 0.999))
        out.append(replace(env, device_age_factor=age))
    return out


def _route_seeds(seed, n):
    ss = np.random.SeedSequence(seed)
    sensor_ss, env_ss = ss.spawn(2)
    return sensor_ss.spawn(n), env_ss


def fleet_theta_table(
    routes: Sequence[RouteSpec],
    sensor_cfg: SensorConfig = SensorConfig(),
    env: Environment | None = None,
    seed=FLEET_SEED,
    margin_steps: int = FLEET_MARGIN_STEPS,
) -> dict[str, float]:
    """theta_init per route id measured once on a fresh reference device.

    ``margin_steps`` moves each phase a few steps inward to absorb
    device-to-device chain variation.
    """
    env = env or Environment.lab()
    table = {}
    for spec, child in zip(routes, np.random.SeedSequence(seed).spawn(len(routes))):
        theta = TDCSensor(sensor_cfg, child).calibrate(fresh(spec), env)
        table[spec.id] = theta - margin_steps * sensor_cfg.theta_step_ps
    return table


def run_schedule(
    routes: Sequence[RouteSpec],
    burn: BurnVector,
    schedule: Schedule,
    env: Environment,
    seed,
    sensor_cfg: SensorConfig = SensorConfig(),
    theta_table: dict[str, float] | None = None,
    params: ModelParams = DEFAULT_PARAMS,
    n_traces: int = 10,
) -> DelaySeries:
    if len(routes) != len(burn):
        raise ScheduleError(f"{len(routes)} routes but {len(burn)} burn bits")
    n = len(routes)
    sensor_seeds, env_seed = _route_seeds(seed, n)
    sensors = [TDCSensor(sensor_cfg, s) for s in sensor_seeds]
    array = SensorArray(sensors)
    envs = route_environments(env, n, env_seed)
    scales = np.array([stress_scale(r, e, params) for r, e in zip(routes, envs)])
    sigmas = np.array([e.noise_sigma_ps for e in envs])
    bank = RouteBank.fresh(routes)
    ids = [r.id for r in routes]
    theta = None
    if theta_table:
        missing = [i for i in ids if i not in theta_table]
        if missing:
            raise ScheduleError(f"theta table has no entry for {missing[0]}")
        theta = np.array([theta_table[i] for i in ids])

    hour = 0.0
    hours: list[float] = []
    columns: list[np.ndarray] = []
    for phase in schedule.phases:
        if isinstance(phase, Calibrate):
            theta = np.array(
                [sensors[i].calibrate(bank.state(i), envs[i]) for i in range(n)]
            )
        elif isinstance(phase, Condition):
            bank = bank.evolve(np.array(phase.values(burn)), phase.hours, scales, params)
            hour += phase.hours
        elif isinstance(phase, Measure):
            if theta is None:
                raise ScheduleError("Measure before Calibrate and no theta table given")
            rise, fall = bank.delays()
            r, f = array.measure(rise, fall, theta, sigmas, n_traces, ids)
            hours.append(hour)
            columns.append(f - r)
        else:  # pragma: no cover
            raise ScheduleError(f"unknown phase {phase!r}")

    lengths = np.array([r.nominal_delay_ps for r in routes])
    if not columns:
        return DelaySeries(ids, lengths, np.empty(0), np.empty((n, 0)))
    delta = np.stack(columns, axis=1)
    delta = delta - delta[:, :1]
    return DelaySeries(ids, lengths, np.array(hours), delta)


# -- CSV ----------------------------------------------------------------

CSV_COLUMNS = ["hour", "route_id", "length_ps", "burn_bit", "delta_ps"]


class SchemaError(ValueError):
    pass


def write_series_csv(fh: IO[str], series: DelaySeries, burn: BurnVector | None = None) -> None:
    cols = CSV_COLUMNS if burn is not None else [c for c in CSV_COLUMNS if c != "burn_bit"]
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(cols)
    for j, h in enumerate(series.hours):
        for i, rid in enumerate(series.route_ids):
            row = [f"{h:g}", rid, f"{series.lengths_ps[i]:g}"]
            if burn is not None:
                row.append(burn.bits[i])
            row.append(f"{series.delta_ps[i, j]:.6f}")
            w.writerow(row)


def read_series_csv(fh: IO[str]) -> tuple[DelaySeries, BurnVector | None]:
    reader = csv.DictReader(fh)
    fields = reader.fieldnames or []
    required = {"hour", "route_id", "length_ps", "delta_ps"}
    missing = required - set(fields)
    if missing:
        raise SchemaError(f"missing columns: {', '.join(sorted(missing))}")
    has_truth = "burn_bit" in fields
    ids: list[str] = []
    index: dict[str, int] = {}
    lengths: dict[str, float] = {}
    truth: dict[str, int] = {}
    points: dict[float, dict[str, float]] = {}
    for lineno, row in enumerate(reader, 2):
        try:
            rid = row["route_id"]
            h = float(row["hour"])
            L = float(row["length_ps"])
            d = float(row["delta_ps"])
            if has_truth:
                truth[rid] = int(row["burn_bit"])
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"line {lineno}: {exc}") from None
        if rid not in index:
            index[rid] = len(ids)
            ids.append(rid)
            lengths[rid] = L
        points.setdefault(h, {})[rid] = d
    if not ids:
        raise SchemaError("no data rows")
    hours = np.array(sorted(points))
    delta = np.full((len(ids), len(hours)), np.nan)
    for j, h in enumerate(hours):
        for rid, d in points[h].items():
            delta[index[rid], j] = d
    if np.isnan(delta).any():
        raise SchemaError("series is not rectangular: some (hour, route) pairs are missing")
    series = DelaySeries(ids, np.array([lengths[r] for r in ids]), hours, delta)
    burn = BurnVector(tuple(truth[r] for r in ids)) if has_truth else None
    return series, burn
