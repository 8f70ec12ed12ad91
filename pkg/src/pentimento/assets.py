"""Route-length inventories of design assets and their remanence exposure."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .bti import (
    DEFAULT_PARAMS,
    Environment,
    ModelParams,
    RouteSpec,
    StressSegment,
    evolve,
    fresh,
)
from .tdc import SensorConfig, noise_floor_ps


class AssetType(enum.Enum):
    CK = "CK"  # cryptographic key material
    SVT = "SVT"  # security-sensitive value or token
    S = "S"  # other secret

    @classmethod
    def parse(cls, text: str) -> AssetType:
        key = text.strip().upper().replace("/", "")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown asset type {text!r}") from None


@dataclass(frozen=True)
class AssetRecord:
    path: str
    asset_type: AssetType
    route_lengths_ps: tuple[float, ...]

    def __post_init__(self):
        if any(not L >= 0 for L in self.route_lengths_ps):
            raise ValueError(f"{self.path}: route lengths must be >= 0")

    @property
    def bus_width(self) -> int:
        return len(self.route_lengths_ps)


@dataclass(frozen=True)
class AssetStats:
    bus_width: int
    mean: float
    sd: float
    min: float
    p25: float
    p50: float
    p75: float
    max: float


STATS_COLUMNS = ["asset_path", "asset_type", "bus_width", "mean", "sd", "min", "p25", "p50", "p75", "max"]


def compute_stats(record: AssetRecord) -> AssetStats:
    """Sample statistics; percentiles use linear interpolation between order
    statistics and the SD uses n - 1 (0 for a single route)."""
    x = np.asarray(record.route_lengths_ps, dtype=float)
    if x.size == 0:
        raise ValueError(f"{record.path}: no routes")
    # summation rounding can push the mean of near-equal values past the extremes
    mean = float(np.clip(x.mean(), x.min(), x.max()))
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    p25, p50, p75 = np.percentile(x, [25, 50, 75], method="linear")
    return AssetStats(
        int(x.size), mean, sd, float(x.min()), float(p25), float(p50), float(p75), float(x.max())
    )


@dataclass(frozen=True)
class Vulnerability:
    path: str
    burn_hours: float
    threshold_ps: float
    delta_ps: tuple[float, ...]  # predicted |Δps| per bus bit

    @property
    def fraction(self) -> float:
        if not self.delta_ps:
            return 0.0
        return float(np.mean(np.asarray(self.delta_ps) > self.threshold_ps))


def predicted_delta(
    length_ps: float, burn_hours: float, env: Environment, params: ModelParams = DEFAULT_PARAMS
) -> float:
    """|Δps| of a fresh route after ``burn_hours`` of constant stress."""
    if length_ps <= 0:
        return 0.0
    state = evolve(fresh(RouteSpec("asset", length_ps)), StressSegment(burn_hours, 1, env), params)
    return abs(state.delta_ps)


def vulnerability(
    record: AssetRecord,
    burn_hours: float,
    env: Environment | None = None,
    threshold_ps: float | None = None,
    sensor: SensorConfig = SensorConfig(),
    params: ModelParams = DEFAULT_PARAMS,
) -> Vulnerability:
    """Per-bit predicted |Δps| and the fraction above the detectability
    threshold (default: twice the sensor's averaged noise floor)."""
    if burn_hours < 0:
        raise ValueError("burn_hours must be >= 0")
    env = env or Environment.lab()
    if threshold_ps is None:
        threshold_ps = 2.0 * noise_floor_ps(sensor, env)
    cache: dict[float, float] = {}
    deltas = []
    for L in record.route_lengths_ps:
        if L not in cache:
            cache[L] = predicted_delta(L, burn_hours, env, params)
        deltas.append(cache[L])
    return Vulnerability(record.path, float(burn_hours), float(threshold_ps), tuple(deltas))


# -- CSV ----------------------------------------------------------------


def read_inventory(fh: IO[str]) -> list[AssetRecord]:
    """Rows of ``asset_path,asset_type,length_ps``; one row per bus bit.
    Records keep first-appearance order."""
    reader = csv.DictReader(fh)
    need = {"asset_path", "asset_type", "length_ps"}
    if not reader.fieldnames or need - set(reader.fieldnames):
        raise ValueError("inventory needs columns asset_path,asset_type,length_ps")
    lengths: dict[str, list[float]] = {}
    types: dict[str, AssetType] = {}
    for lineno, row in enumerate(reader, 2):
        try:
            path = row["asset_path"].strip()
            kind = AssetType.parse(row["asset_type"])
            L = float(row["length_ps"])
        except (AttributeError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        if not path:
            raise ValueError(f"line {lineno}: empty asset_path")
        if L < 0:
            raise ValueError(f"line {lineno}: negative length")
        if path in types and types[path] is not kind:
            raise ValueError(f"line {lineno}: asset {path} changes type")
        types[path] = kind
        lengths.setdefault(path, []).append(L)
    if not lengths:
        raise ValueError("inventory has no rows")
    return [AssetRecord(p, types[p], tuple(v)) for p, v in lengths.items()]


def write_stats_csv(fh: IO[str], records: Sequence[AssetRecord]) -> None:
    """One row per asset, ascending by maximum route length."""
    rows = sorted(((r, compute_stats(r)) for r in records), key=lambda rs: (rs[1].max, rs[0].path))
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(STATS_COLUMNS)
    for rec, st in rows:
        w.writerow(
            [rec.path, rec.asset_type.value, st.bus_width]
            + [f"{v:.1f}" for v in (st.mean, st.sd, st.min, st.p25, st.p50, st.p75, st.max)]
        )


def write_vulnerability_csv(fh: IO[str], vulns: Sequence[Vulnerability]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["asset_path", "burn_hours", "threshold_ps", "bus_width", "mean_delta_ps", "fraction_detectable"])
    for v in vulns:
        mean = float(np.mean(v.delta_ps)) if v.delta_ps else 0.0
        w.writerow(
            [v.path, f"{v.burn_hours:g}", f"{v.threshold_ps:.4f}", len(v.delta_ps), f"{mean:.4f}", f"{v.fraction:.4f}"]
        )
