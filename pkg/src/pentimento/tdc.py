"""Tunable dual-polarity TDC: route under test feeding a carry chain.

Only the launch/capture phase difference ``theta`` matters; the time budget
left for the transition once it leaves the route is
``theta - true_delay(route, polarity)`` plus jitter.  The budget is walked
along the chain's per-element delays to find the front.

Metastability is modelled in two parts.  The element in flight at the capture
edge resolves to the propagated value with probability equal to the fraction
of it already traversed, which keeps the expected Hamming distance linear in
the budget.  Bits within ``metastable_band`` of the front are then swapped
pairwise across the front with probability ``flip_probability`` ("bubbles");
swaps break monotonicity but not the Hamming distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np

from .bti import Environment, Polarity, RouteState, true_delay


class CalibrationError(RuntimeError):
    pass


class MeasurementError(RuntimeError):
    pass


@dataclass(frozen=True)
class SensorConfig:
    chain_length: int = 64
    element_tau_ps: float = 2.8
    tau_variation_sigma: float = 0.05
    theta_step_ps: float = 2.8
    metastable_band: int = 2
    flip_probability: float = 0.25
    samples_per_trace: int = 16  # launches per polarity
    theta_max_ps: float = 12000.0
    theta_min_ps: float = 0.0

    def __post_init__(self):
        if self.chain_length < 1 or self.element_tau_ps <= 0 or self.theta_step_ps <= 0:
            raise ValueError("invalid sensor configuration")
        if self.metastable_band < 0 or self.tau_variation_sigma < 0:
            raise ValueError("invalid sensor configuration")

    def snap_theta(self, theta_ps: float) -> float:
        """Largest programmable phase not above ``theta_ps``."""
        return np.floor(theta_ps / self.theta_step_ps + 1e-9) * self.theta_step_ps

    @property
    def span_ps(self) -> float:
        return self.chain_length * self.element_tau_ps


@dataclass(frozen=True)
class CaptureSnapshot:
    bits: np.ndarray  # bool, index 0 nearest the route
    polarity: Polarity

    @property
    def saturated(self) -> bool:
        d = hamming_distance(self)
        return d == 0 or d == len(self.bits)

    def to_hex(self) -> str:
        value = 0
        for i in np.flatnonzero(self.bits):
            value |= 1 << int(i)
        width = (len(self.bits) + 3) // 4
        return f"{value:0{width}x}"

    @classmethod
    def from_hex(cls, text: str, polarity: Polarity, chain_length: int = 64) -> CaptureSnapshot:
        value = int(text, 16)
        bits = np.array([(value >> i) & 1 for i in range(chain_length)], dtype=bool)
        return cls(bits, polarity)


@dataclass(frozen=True)
class Trace:
    snapshots: list[CaptureSnapshot]
    theta_ps: float

    def distances(self, polarity: Polarity) -> list[int]:
        return [hamming_distance(s) for s in self.snapshots if s.polarity is polarity]


def hamming_distance(snapshot: CaptureSnapshot) -> int:
    """Distance from all-zeros (rising) or all-ones (falling)."""
    ones = int(np.count_nonzero(snapshot.bits))
    if snapshot.polarity is Polarity.RISING:
        return ones
    return len(snapshot.bits) - ones


_POLARITIES = (Polarity.RISING, Polarity.FALLING)


class _Stream:
    """Buffered draws from one generator (keeps per-call overhead low)."""

    def __init__(self, seed, kind: str, chunk: int = 1 << 14):
        self._rng = np.random.default_rng(seed)
        self._kind = kind
        self._chunk = chunk
        self._buf = np.empty(0)
        self._pos = 0

    def take(self, n: int) -> np.ndarray:
        if self._pos + n > len(self._buf):
            rest = self._buf[self._pos :]
            size = max(self._chunk, n)
            fresh = (
                self._rng.standard_normal(size)
                if self._kind == "normal"
                else self._rng.random(size)
            )
            self._buf = np.concatenate([rest, fresh])
            self._pos = 0
        out = self._buf[self._pos : self._pos + n]
        self._pos += n
        return out


def _children(seed, n: int) -> list[np.random.SeedSequence]:
    """Child seeds that depend only on ``seed`` (``SeedSequence.spawn`` would
    advance the parent and give different children on a second call)."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [
        np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (k,), pool_size=ss.pool_size)
        for k in range(n)
    ]


# sweep steps whose noiseless budget exceeds the chain by this many jitter
# sigmas are treated as saturated without sampling
_SKIP_SIGMAS = 8.0


class TDCSensor:
    """One TDC instance: a frozen carry chain plus private RNG streams."""

    def __init__(self, cfg: SensorConfig = SensorConfig(), seed=None):
        self.cfg = cfg
        chain_ss, jitter_ss, meta_ss, bubble_ss = _children(seed, 4)
        z = np.clip(np.random.default_rng(chain_ss).standard_normal(cfg.chain_length), -3.0, 3.0)
        self.tau = cfg.element_tau_ps * (1.0 + cfg.tau_variation_sigma * z)
        self.arrival = np.cumsum(self.tau)  # transition reaches output i at arrival[i]
        self._start = np.concatenate(([0.0], self.arrival[:-1]))
        self._jitter = _Stream(jitter_ss, "normal")
        self._meta = _Stream(meta_ss, "uniform")
        self._bubble = np.random.default_rng(bubble_ss)

    # -- datapath -------------------------------------------------------

    def front(self, budget_ps) -> np.ndarray:
        """Noise-free continuous front position (elements) for a budget."""
        b = np.asarray(budget_ps, dtype=float)
        k = np.searchsorted(self.arrival, b + 1e-9, side="right")
        inner = np.minimum(k, self.cfg.chain_length - 1)
        frac = np.clip((b - self._start[inner]) / self.tau[inner], 0.0, 1.0)
        return np.where(k >= self.cfg.chain_length, float(self.cfg.chain_length), k + frac)

    def distances(self, budget_ps) -> np.ndarray:
        """Sampled Hamming distances for an array of time budgets."""
        b = np.asarray(budget_ps, dtype=float)
        k = np.searchsorted(self.arrival, b + 1e-9, side="right")
        if self.cfg.metastable_band == 0:
            return k
        inner = np.minimum(k, self.cfg.chain_length - 1)
        frac = np.clip((b - self._start[inner]) / self.tau[inner], 0.0, 1.0)
        frac = np.where(k >= self.cfg.chain_length, 0.0, frac)
        u = self._meta.take(b.size).reshape(b.shape)
        return k + (u < frac)

    def budgets(self, delay_ps: float, theta_ps, n: int, env=None) -> np.ndarray:
        """Time budgets for ``n`` launches at each theta (shape theta.shape + (n,))."""
        theta = np.asarray(theta_ps, dtype=float)
        out = np.repeat((theta - delay_ps)[..., None], n, axis=-1)
        sigma = env.noise_sigma_ps if env is not None else 0.0
        if sigma > 0:
            out = out + sigma * self._jitter.take(out.size).reshape(out.shape)
        return out

    def capture(
        self, route: RouteState, polarity: Polarity, theta_ps: float, env: Environment | None = None
    ) -> CaptureSnapshot:
        budget = self.budgets(true_delay(route, polarity), theta_ps, 1, env)
        count = int(self.distances(budget)[0])
        return self._snapshot(count, polarity)

    def _snapshot(self, count: int, polarity: Polarity) -> CaptureSnapshot:
        n = self.cfg.chain_length
        propagated = polarity is Polarity.RISING
        bits = np.full(n, not propagated, dtype=bool)
        bits[:count] = propagated
        for j in range(1, self.cfg.metastable_band + 1):
            lo, hi = count - j, count + j - 1
            if lo < 0 or hi >= n:
                break
            if self._bubble.random() < self.cfg.flip_probability:
                bits[lo], bits[hi] = bits[hi], bits[lo]
        return CaptureSnapshot(bits, polarity)

    def trace(self, route: RouteState, theta_ps: float, env: Environment | None = None) -> Trace:
        """2^4 launches, each yielding a rising then a falling snapshot."""
        snaps = []
        for _ in range(self.cfg.samples_per_trace):
            for pol in _POLARITIES:
                snaps.append(self.capture(route, pol, theta_ps, env))
        return Trace(snaps, float(theta_ps))

    def trace_distances(self, delays, thetas, env) -> np.ndarray:
        """Hamming distances shaped (len(thetas), samples, 2) for the
        (rise, fall) ``delays``."""
        s = self.cfg.samples_per_trace
        t = np.asarray(thetas, dtype=float)
        out = np.empty((t.shape[0], s, 2), dtype=np.int64)
        for j in range(2):
            out[:, :, j] = self.distances(self.budgets(delays[j], t, s, env))
        return out

    # -- procedures -----------------------------------------------------

    def calibrate(self, route: RouteState, env: Environment | None = None, block: int = 64) -> float:
        """Sweep theta down from the top of its range until every sample of a
        trace shows both fronts strictly inside the chain."""
        cfg = self.cfg
        n = cfg.chain_length
        delays = (true_delay(route, Polarity.RISING), true_delay(route, Polarity.FALLING))
        top = cfg.snap_theta(cfg.theta_max_ps)
        sigma = env.noise_sigma_ps if env is not None else 0.0
        certain = min(delays) + self.arrival[-1] + _SKIP_SIGMAS * sigma
        if top > certain:
            skip = np.floor((top - certain) / cfg.theta_step_ps)
            top -= skip * cfg.theta_step_ps
        theta = top
        while theta >= cfg.theta_min_ps - 1e-9:
            thetas = theta - cfg.theta_step_ps * np.arange(block)
            thetas = thetas[thetas >= cfg.theta_min_ps - 1e-9]
            d = self.trace_distances(delays, thetas, env)
            ok = ((d > 0) & (d < n)).all(axis=(1, 2))
            hit = np.flatnonzero(ok)
            if len(hit):
                return float(thetas[hit[0]])
            theta = thetas[-1] - cfg.theta_step_ps
        raise CalibrationError(f"calibration failed for route {route.spec.id}")

    def measure_route(
        self,
        route: RouteState,
        theta_init: float,
        n_traces: int = 10,
        env: Environment | None = None,
    ) -> tuple[float, float]:
        """Delay readings (rise_ps, fall_ps) from ``n_traces`` traces taken
        at theta_init, theta_init - step, ...; each trace's mean distance is
        converted back to a delay relative to its own theta."""
        delays = (true_delay(route, Polarity.RISING), true_delay(route, Polarity.FALLING))
        thetas = theta_init - self.cfg.theta_step_ps * np.arange(n_traces)
        d = self.trace_distances(delays, thetas, env)
        _check_saturation(d[None], self.cfg.chain_length, [route.spec.id])
        readings = thetas[:, None] - d.mean(axis=1) * self.cfg.element_tau_ps
        rise, fall = readings.mean(axis=0)
        return float(rise), float(fall)


def _check_saturation(d, n, ids):
    """``d``: (routes, traces, samples, 2)."""
    lo = d.min(axis=2)
    hi = d.max(axis=2)
    bad = ((hi == 0) | (lo == n)).all(axis=2)
    if bad.any():
        r, t = np.argwhere(bad)[0]
        raise MeasurementError(f"route {ids[r]}: trace {t} saturated")


class _StackedStream:
    """Row-wise view of one stream per sensor; refills pull each sensor's own
    stream in turn, so every sensor sees its draws in the original order."""

    def __init__(self, streams: list[_Stream], chunk: int = 4096):
        self._streams = streams
        self._chunk = chunk
        self._buf = np.empty((len(streams), 0))
        self._pos = 0

    def take(self, n: int) -> np.ndarray:
        if self._pos + n > self._buf.shape[1]:
            size = max(self._chunk, n)
            fresh = np.stack([s.take(size) for s in self._streams])
            self._buf = np.concatenate([self._buf[:, self._pos :], fresh], axis=1)
            self._pos = 0
        out = self._buf[:, self._pos : self._pos + n]
        self._pos += n
        return out


class SensorArray:
    """Many TDC instances measured together.

    Draws come from each sensor's own streams in the same order as
    :meth:`TDCSensor.measure_route`, so results match the per-route path as
    long as the sensors are not also used on their own once the array has
    started drawing.
    """

    def __init__(self, sensors: list[TDCSensor]):
        self.sensors = sensors
        self.cfg = sensors[0].cfg
        n = self.cfg.chain_length
        self.arrival = np.stack([s.arrival for s in sensors])
        self.tau = np.stack([s.tau for s in sensors])
        self.start = np.stack([s._start for s in sensors])
        self._offset = (self.arrival[:, -1].max() + 10.0) * np.arange(len(sensors))
        self._flat = (self.arrival + self._offset[:, None]).ravel()
        self._base = n * np.arange(len(sensors))
        # the array takes over the sensors' jitter and metastability draws
        self._jitter = _StackedStream([s._jitter for s in sensors])
        self._meta = _StackedStream([s._meta for s in sensors])

    def _distances(self, budgets: np.ndarray) -> np.ndarray:
        """``budgets``: (routes, m) -> sampled distances, drawing metastable
        uniforms from each sensor in route order."""
        cfg = self.cfg
        n = cfg.chain_length
        b = np.clip(budgets, -1.0, self.arrival[:, -1:] + 1.0)
        k = np.searchsorted(self._flat, (b + 1e-9 + self._offset[:, None]).ravel(), side="right")
        k = k.reshape(b.shape) - self._base[:, None]
        if cfg.metastable_band == 0:
            return k
        inner = np.minimum(k, n - 1)
        rows = np.arange(len(self.sensors))[:, None]
        frac = np.clip((b - self.start[rows, inner]) / self.tau[rows, inner], 0.0, 1.0)
        frac = np.where(k >= n, 0.0, frac)
        return k + (self._meta.take(b.shape[1]) < frac)

    def measure(self, rise_delay, fall_delay, theta_init, sigmas, n_traces=10, ids=None):
        """Vectorised :meth:`TDCSensor.measure_route` over all sensors."""
        cfg = self.cfg
        r = len(self.sensors)
        s = cfg.samples_per_trace
        steps = cfg.theta_step_ps * np.arange(n_traces)
        thetas = np.asarray(theta_init, float)[:, None] - steps  # (routes, traces)
        sigmas = np.asarray(sigmas, float)
        d = np.empty((r, n_traces, s, 2), dtype=np.int64)
        for j, delay in enumerate((rise_delay, fall_delay)):
            base = np.repeat((thetas - np.asarray(delay)[:, None])[..., None], s, axis=-1)
            if (sigmas > 0).all():
                jit = sigmas[:, None] * self._jitter.take(n_traces * s)
            elif (sigmas == 0).all():
                jit = np.zeros((r, n_traces * s))
            else:
                raise ValueError("noise must be zero on all sensors or on none")
            jit = jit.reshape(r, n_traces, s)
            d[..., j] = self._distances((base + jit).reshape(r, -1)).reshape(r, n_traces, s)
        _check_saturation(d, cfg.chain_length, ids or [str(i) for i in range(r)])
        readings = thetas[..., None] - d.mean(axis=2) * cfg.element_tau_ps  # (routes, traces, 2)
        out = readings.mean(axis=1)
        return out[:, 0], out[:, 1]


# -- functional API (fresh sensor per call) ------------------------------


def capture(route, cfg: SensorConfig, polarity: Polarity, rng_seed, theta_ps: float, env=None):
    return TDCSensor(cfg, rng_seed).capture(route, polarity, theta_ps, env)


def calibrate(route, cfg: SensorConfig, rng_seed=None, env=None) -> float:
    return TDCSensor(cfg, rng_seed).calibrate(route, env)


def measure_route(route, cfg: SensorConfig, theta_init, n_traces=10, rng_seed=None, env=None):
    return TDCSensor(cfg, rng_seed).measure_route(route, theta_init, n_traces, env)


def noise_floor_ps(cfg: SensorConfig, env: Environment | None = None, n_traces: int = 10) -> float:
    """Standard deviation of a measured (fall - rise) reading.

    Per-sample variance is the jitter plus the in-flight element's Bernoulli
    resolution (mean 1/6 element^2 over a uniform front phase).
    """
    sigma = env.noise_sigma_ps if env is not None else 0.0
    var = sigma**2
    if cfg.metastable_band > 0:
        var += cfg.element_tau_ps**2 / 6.0
    else:
        var += cfg.element_tau_ps**2 / 12.0
    per_polarity = var / (n_traces * cfg.samples_per_trace)
    return float(np.sqrt(2 * per_polarity))


# -- trace dump ---------------------------------------------------------


def write_trace_dump(traces: Iterable[Trace], fh: IO[str]) -> None:
    for t_idx, trace in enumerate(traces):
        for s_idx, snap in enumerate(trace.snapshots):
            fh.write(f"{t_idx}, {s_idx}, {snap.polarity.value}, {snap.to_hex()}\n")


def read_trace_dump(fh: IO[str], chain_length: int = 64) -> list[tuple[int, int, CaptureSnapshot]]:
    rows = []
    for lineno, line in enumerate(fh, 1):
        line = line.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 4:
            raise ValueError(f"line {lineno}: expected 4 fields, got {len(parts)}")
        t_idx, s_idx, pol, hexbits = parts
        snap = CaptureSnapshot.from_hex(hexbits, Polarity(pol), chain_length)
        rows.append((int(t_idx), int(s_idx), snap))
    return rows
