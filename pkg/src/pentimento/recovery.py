"""Attacker-side analysis: kernel smoothing and bit classification."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .experiment import BurnVector, DelaySeries

TM1_BANDWIDTH_H = 30.0
TM2_BANDWIDTH_H = 12.0
TM1_MIN_POINTS = 10
TM2_MIN_POINTS = 5
# TM2 reports no ones unless the fitted drop of the longest class is at
# least this many noise widths
TM2_MIN_SEPARATION = 2.0


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class SmoothedSeries:
    hours: np.ndarray
    values_ps: np.ndarray

    def __len__(self):
        return len(self.hours)


@dataclass(frozen=True)
class BitVerdict:
    route_id: str
    predicted_bit: int
    confidence: float

    def __post_init__(self):
        if self.predicted_bit not in (0, 1):
            raise ValueError("predicted_bit must be 0 or 1")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")


def kernel_smooth(hours, values, bandwidth_hours: float) -> SmoothedSeries:
    """Local-linear regression with a Gaussian kernel, evaluated at ``hours``.

    ``values`` may be 1-d (points,) or 2-d (series, points); rows share the grid.
    """
    x = np.asarray(hours, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.ndim != 1 or y.shape[-1] != x.shape[0]:
        raise ValueError("values must end in an axis matching hours")
    if len(x) < 2:
        raise InsufficientDataError("kernel smoothing needs at least 2 points")
    if not bandwidth_hours > 0:
        raise ValueError("bandwidth must be > 0")
    dx = x[None, :] - x[:, None]  # (eval, data)
    w = np.exp(-0.5 * (dx / bandwidth_hours) ** 2)
    s0 = w.sum(axis=1)
    s1 = (w * dx).sum(axis=1)
    s2 = (w * dx**2).sum(axis=1)
    denom = s0 * s2 - s1**2
    # equivalent kernel: fitted value = sum_j l_ij y_j
    with np.errstate(invalid="ignore", divide="ignore"):
        lin = w * (s2[:, None] - s1[:, None] * dx) / denom[:, None]
    # points whose neighbourhood holds a single sample fall back to the
    # local-constant fit
    flat = ~(np.abs(denom) > 1e-12 * s0 * np.maximum(s2, 1e-300))
    if flat.any():
        lin[flat] = w[flat] / s0[flat, None]
    fitted = y @ lin.T
    return SmoothedSeries(x.copy(), fitted)


def _check_ids(series: DelaySeries):
    if len(series.route_ids) != series.delta_ps.shape[0]:
        raise ValueError("route ids do not match series rows")


def _class_median(magnitude: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    out = np.empty_like(magnitude)
    for L in np.unique(lengths):
        m = lengths == L
        out[m] = np.median(magnitude[m])
    return out


def tm1_trends(series: DelaySeries, bandwidth_hours: float = TM1_BANDWIDTH_H) -> np.ndarray:
    """Smoothed end-minus-start difference per route."""
    sm = kernel_smooth(series.hours, series.delta_ps, bandwidth_hours).values_ps
    return sm[:, -1] - sm[:, 0]


def classify_tm1(
    series: DelaySeries, bandwidth_hours: float = TM1_BANDWIDTH_H
) -> list[BitVerdict]:
    """Burn-phase attack: a rising Δps means the route held 1.

    A route with no trend at all is reported as 0 with confidence 0.
    """
    _check_ids(series)
    if len(series) < TM1_MIN_POINTS:
        raise InsufficientDataError(
            f"TM1 needs at least {TM1_MIN_POINTS} points, got {len(series)}"
        )
    diff = tm1_trends(series, bandwidth_hours)
    scale = _class_median(np.abs(diff), series.lengths_ps)
    out = []
    for rid, d, s in zip(series.route_ids, diff, scale):
        conf = float(min(1.0, abs(d) / s)) if s > 0 else 0.0
        out.append(BitVerdict(rid, int(d > 0), conf))
    return out


def tm2_trends(series: DelaySeries, bandwidth_hours: float = TM2_BANDWIDTH_H) -> np.ndarray:
    sm = kernel_smooth(series.hours, series.delta_ps, bandwidth_hours).values_ps
    return sm[:, -1] - sm[:, 0]


def _lower_group(x: np.ndarray) -> np.ndarray:
    """Mask of the lower group of the 1-d two-means split (exhaustive over
    cut points of the sorted values)."""
    order = np.argsort(x, kind="stable")
    v = x[order]
    n = len(v)
    if n < 2:
        return np.zeros(n, dtype=bool)
    k = np.arange(1, n)
    csum, csq = np.cumsum(v), np.cumsum(v**2)
    left = csq[:-1] - csum[:-1] ** 2 / k
    right = (csq[-1] - csq[:-1]) - (csum[-1] - csum[:-1]) ** 2 / (n - k)
    cut = int(k[np.argmin(left + right)])
    mask = np.zeros(n, dtype=bool)
    mask[order[:cut]] = True
    return mask


@dataclass(frozen=True)
class RecoveryMixture:
    """Two-group fit of window trends.

    Group 0 (held 0) trends as ``offset + slope * length``; group 1 (held 1)
    sits below that by ``drop_per_ps * length``.
    """

    offset: float
    slope: float
    drop_per_ps: float
    sigma: float
    posterior: np.ndarray  # P(group 1) per route


def fit_recovery_mixture(trend, lengths, iterations: int = 200) -> RecoveryMixture:
    """EM fit with equal priors and a shared noise width."""
    t = np.asarray(trend, float)
    L = np.asarray(lengths, float)
    ones = np.ones_like(t)
    design = np.block([[ones[:, None], L[:, None], 0 * L[:, None]], [ones[:, None], L[:, None], -L[:, None]]])
    target = np.concatenate([t, t])
    # start from the best split of length-normalised trends
    r = _lower_group(t / L).astype(float)
    offset = slope = drop = 0.0
    sigma = 1.0
    for it in range(iterations):
        if it:
            mu0 = offset + slope * L
            mu1 = mu0 - drop * L
            z = ((t - mu1) ** 2 - (t - mu0) ** 2) / (2 * sigma**2)
            r = 1.0 / (1.0 + np.exp(np.clip(z, -700, 700)))
        # weighted least squares over both group assignments
        w = np.sqrt(np.concatenate([1 - r, r]))
        coef, *_ = np.linalg.lstsq(design * w[:, None], target * w, rcond=None)
        offset, slope, drop = (float(c) for c in coef)
        drop = max(drop, 0.0)
        mu0 = offset + slope * L
        var = np.mean((1 - r) * (t - mu0) ** 2 + r * (t - mu0 + drop * L) ** 2)
        sigma = max(float(np.sqrt(var)), 1e-12)
    return RecoveryMixture(offset, slope, drop, sigma, r)


def classify_tm2(
    series: DelaySeries, bandwidth_hours: float = TM2_BANDWIDTH_H
) -> list[BitVerdict]:
    """Recovery-phase attack on a window of post-acquisition measurements.

    Routes that held 1 recover, so their trend falls below that of the
    routes that held 0 by an amount that grows with route length.  A
    two-group mixture is fitted to all trends; a route is predicted 1 when
    it more likely belongs to the falling group.  If even the longest class
    shows no drop of at least ``TM2_MIN_SEPARATION`` noise widths, every
    route is predicted 0.
    """
    _check_ids(series)
    if len(series) < TM2_MIN_POINTS:
        raise InsufficientDataError(
            f"TM2 needs at least {TM2_MIN_POINTS} points in the window, got {len(series)}"
        )
    trend = tm2_trends(series, bandwidth_hours)
    if np.ptp(trend) <= 1e-12 * max(1.0, np.abs(trend).max()):
        return [BitVerdict(r, 0, 0.0) for r in series.route_ids]
    fit = fit_recovery_mixture(trend, series.lengths_ps)
    separation = fit.drop_per_ps * series.lengths_ps.max() / fit.sigma
    if separation < TM2_MIN_SEPARATION:
        return [BitVerdict(r, 0, 0.0) for r in series.route_ids]
    p = fit.posterior
    return [
        BitVerdict(r, int(q > 0.5), float(min(1.0, abs(2 * q - 1))))
        for r, q in zip(series.route_ids, p)
    ]


# -- scoring ------------------------------------------------------------


@dataclass(frozen=True)
class AccuracyReport:
    accuracy: float
    per_class: dict = field(default_factory=dict)  # length_ps -> accuracy
    confusion: dict = field(default_factory=dict)  # "tp"/"tn"/"fp"/"fn" (1 = positive)
    n: int = 0

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "accuracy": self.accuracy,
            "per_class": {f"{k:g}": v for k, v in sorted(self.per_class.items())},
            "confusion": dict(self.confusion),
        }


def score(
    verdicts: Sequence[BitVerdict], truth: BurnVector, lengths_ps: Sequence[float] | None = None
) -> AccuracyReport:
    if len(verdicts) != len(truth):
        raise ValueError(f"{len(verdicts)} verdicts but {len(truth)} truth bits")
    pred = np.array([v.predicted_bit for v in verdicts], dtype=int)
    true = np.array(truth.bits, dtype=int)
    hit = pred == true
    confusion = {
        "tp": int(((pred == 1) & (true == 1)).sum()),
        "tn": int(((pred == 0) & (true == 0)).sum()),
        "fp": int(((pred == 1) & (true == 0)).sum()),
        "fn": int(((pred == 0) & (true == 1)).sum()),
    }
    per_class = {}
    if lengths_ps is not None:
        lengths = np.asarray(lengths_ps, float)
        if len(lengths) != len(pred):
            raise ValueError("lengths do not match verdicts")
        for L in np.unique(lengths):
            per_class[float(L)] = float(hit[lengths == L].mean())
    acc = float(hit.mean()) if len(hit) else 0.0
    return AccuracyReport(acc, per_class, confusion, len(hit))


def write_verdicts_csv(fh: IO[str], verdicts: Sequence[BitVerdict]) -> None:
    fh.write("route_id,predicted,confidence\n")
    for v in verdicts:
        fh.write(f"{v.route_id},{v.predicted_bit},{v.confidence:.6f}\n")


def write_summary(fh: IO[str], mode: str, verdicts, report: AccuracyReport | None) -> None:
    doc = {
        "mode": mode,
        "routes": len(verdicts),
        "predicted_ones": sum(v.predicted_bit for v in verdicts),
    }
    if report is not None:
        doc["score"] = report.to_dict()
    json.dump(doc, fh, indent=2, sort_keys=True)
    fh.write("\n")
