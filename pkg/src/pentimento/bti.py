"""BTI degradation and recovery of programmable routes.

Each route carries two drift components:

* ``drift_fall_ps`` grows while the route holds logic 1 (PBTI on the NMOS
  pass devices, which slows the falling transition);
* ``drift_rise_ps`` grows while the route holds logic 0 (NBTI on the PMOS
  devices, which slows the rising transition).

The observable is ``delta_ps = drift_fall_ps - drift_rise_ps``.

Growth is a power law in the route's cumulative biased time, scaled by the
number of stressed elements, a temperature acceleration and the device age
factor.  A component that is no longer stressed relaxes as
``anchor * exp(-(t / tau) ** beta)`` with ``t`` the hours since stress ended.
The fall (burn-1) component relaxes fast, the rise (burn-0) component slowly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

ROUTE_ELEMENT_PS = 10.0
"""Nominal delay of one routing element; sets ``element_count``."""


class Polarity(enum.Enum):
    RISING = "R"
    FALLING = "F"


class Regime(enum.Enum):
    LAB = "lab"
    CLOUD = "cloud"


@dataclass(frozen=True)
class ModelParams:
    """Constants of the degradation/recovery law.

    Defaults are the output of :func:`pentimento.calibration.fit_model` on
    the lab anchors (see ``pentimento calibrate-model``).
    """

    amplitude_ps: float = 0.003465724216  # per stressed element at 1 h, 60 C
    exponent: float = 0.2
    overhead_elements: float = 50.0
    cap_ratio: float = 2.0  # cap at cap_ratio x the 400 h value
    cap_hours: float = 400.0
    theta_t_c: float = 30.0
    reference_temp_c: float = 60.0
    fast_tau_h: float = 31.3555
    fast_beta: float = 2.0
    slow_tau_h: float = 400.0
    slow_beta: float = 1.0


DEFAULT_PARAMS = ModelParams()


@dataclass(frozen=True)
class RouteSpec:
    id: str
    nominal_delay_ps: float
    element_count: int = field(default=0)

    def __post_init__(self):
        if not self.nominal_delay_ps > 0:
            raise ValueError(f"route {self.id}: nominal_delay_ps must be > 0")
        if self.element_count <= 0:
            count = max(1, round(self.nominal_delay_ps / ROUTE_ELEMENT_PS))
            object.__setattr__(self, "element_count", count)


@dataclass(frozen=True)
class Environment:
    regime: Regime = Regime.LAB
    temperature_c: float = 60.0
    device_age_factor: float = 1.0
    noise_sigma_ps: float = 0.5

    def __post_init__(self):
        if not 0 < self.device_age_factor <= 1:
            raise ValueError("device_age_factor must lie in (0, 1]")
        if self.noise_sigma_ps < 0:
            raise ValueError("noise_sigma_ps must be >= 0")
        if self.regime is Regime.LAB and self.device_age_factor != 1:
            raise ValueError("lab environment uses a factory-new device")
        if self.regime is Regime.CLOUD:
            if self.device_age_factor >= 1 or self.noise_sigma_ps <= 0:
                raise ValueError("cloud environment needs age < 1 and noise > 0")

    @classmethod
    def lab(cls, **kw) -> Environment:
        return cls(regime=Regime.LAB, **kw)

    @classmethod
    def cloud(cls, **kw) -> Environment:
        kw.setdefault("device_age_factor", 0.12)
        kw.setdefault("noise_sigma_ps", 0.5)
        return cls(regime=Regime.CLOUD, **kw)


@dataclass(frozen=True)
class StressSegment:
    duration_hours: float
    logic_value: int
    environment: Environment = field(default_factory=Environment)

    def __post_init__(self):
        if self.logic_value not in (0, 1):
            raise ValueError("logic_value must be 0 or 1")


class ContractError(ValueError):
    """A precondition of an operation was violated."""


@dataclass(frozen=True)
class RouteState:
    spec: RouteSpec
    drift_rise_ps: float = 0.0
    drift_fall_ps: float = 0.0
    stress_hours_at_value: tuple[float, float] = (0.0, 0.0)
    # relaxation bookkeeping: level when stress last ended, hours since then
    anchor_ps: tuple[float, float] = (0.0, 0.0)  # (rise, fall)
    relax_hours: tuple[float, float] = (0.0, 0.0)

    @property
    def delta_ps(self) -> float:
        return self.drift_fall_ps - self.drift_rise_ps

    @property
    def total_stress_hours(self) -> float:
        return self.stress_hours_at_value[0] + self.stress_hours_at_value[1]


def fresh(spec: RouteSpec) -> RouteState:
    return RouteState(spec)


def acceleration(temperature_c: float, params: ModelParams = DEFAULT_PARAMS) -> float:
    return math.exp((temperature_c - params.reference_temp_c) / params.theta_t_c)


def stress_scale(spec: RouteSpec, env: Environment, params: ModelParams = DEFAULT_PARAMS) -> float:
    """Drift (ps) accumulated by a fresh route after 1 h of stress."""
    n_eff = spec.element_count + params.overhead_elements
    return (
        params.amplitude_ps * n_eff * acceleration(env.temperature_c, params) * env.device_age_factor
    )


def relaxation(hours: float, tau_h: float, beta: float) -> float:
    """Fraction of a drift component left after ``hours`` without stress."""
    if hours <= 0:
        return 1.0
    return math.exp(-((hours / tau_h) ** beta))


def _advance(drift, anchor, relax, held_total, value, dt, scale, params: ModelParams):
    """Shared update kernel; works on scalars or on (..., 2) arrays.

    ``drift``, ``anchor`` and ``relax`` have a trailing axis (rise, fall);
    ``value`` selects the stressed component (1 stresses fall).
    """
    n = params.exponent
    growth = scale * ((held_total + dt) ** n - held_total**n)
    cap = params.cap_ratio * scale * params.cap_hours**n
    stressed = np.stack([value == 0, value == 1], axis=-1)

    grown = np.minimum(drift + growth[..., None], np.maximum(cap[..., None], drift))
    relax = np.where(stressed, 0.0, relax + np.asarray(dt)[..., None])
    tau = np.array([params.slow_tau_h, params.fast_tau_h])
    beta = np.array([params.slow_beta, params.fast_beta])
    decayed = anchor * np.exp(-((relax / tau) ** beta))
    drift = np.where(stressed, grown, decayed)
    anchor = np.where(stressed, grown, anchor)
    return drift, anchor, relax


def evolve(
    state: RouteState, segment: StressSegment, params: ModelParams = DEFAULT_PARAMS
) -> RouteState:
    """Advance ``state`` through one constant-value stress segment."""
    dt = segment.duration_hours
    if not dt >= 0:
        raise ContractError(f"negative segment duration {dt!r}")
    if dt == 0:
        return state
    scale = np.asarray(stress_scale(state.spec, segment.environment, params))
    drift, anchor, relax = _advance(
        np.array([state.drift_rise_ps, state.drift_fall_ps]),
        np.array(state.anchor_ps),
        np.array(state.relax_hours),
        state.total_stress_hours,
        np.asarray(segment.logic_value),
        dt,
        scale,
        params,
    )
    held = list(state.stress_hours_at_value)
    held[segment.logic_value] += dt
    return replace(
        state,
        drift_rise_ps=float(drift[0]),
        drift_fall_ps=float(drift[1]),
        stress_hours_at_value=(held[0], held[1]),
        anchor_ps=(float(anchor[0]), float(anchor[1])),
        relax_hours=(float(relax[0]), float(relax[1])),
    )


def evolve_many(
    state: RouteState, segments, params: ModelParams = DEFAULT_PARAMS
) -> RouteState:
    for seg in segments:
        state = evolve(state, seg, params)
    return state


def true_delay(state: RouteState, polarity: Polarity) -> float:
    drift = state.drift_rise_ps if polarity is Polarity.RISING else state.drift_fall_ps
    return state.spec.nominal_delay_ps + drift


@dataclass
class RouteBank:
    """Struct-of-arrays view of many routes, advanced together.

    Row ``i`` evolves exactly as ``RouteState`` ``i`` would under
    :func:`evolve`; used by the experiment runner for speed.
    """

    specs: list[RouteSpec]
    drift: np.ndarray  # (routes, 2): rise, fall
    anchor: np.ndarray
    relax: np.ndarray
    held: np.ndarray  # (routes, 2): hours at 0, hours at 1

    @classmethod
    def fresh(cls, specs) -> RouteBank:
        n = len(specs)
        z = lambda: np.zeros((n, 2))
        return cls(list(specs), z(), z(), z(), z())

    @classmethod
    def from_states(cls, states) -> RouteBank:
        return cls(
            [s.spec for s in states],
            np.array([[s.drift_rise_ps, s.drift_fall_ps] for s in states]).reshape(-1, 2),
            np.array([s.anchor_ps for s in states], float).reshape(-1, 2),
            np.array([s.relax_hours for s in states], float).reshape(-1, 2),
            np.array([s.stress_hours_at_value for s in states], float).reshape(-1, 2),
        )

    def __len__(self):
        return len(self.specs)

    def state(self, i: int) -> RouteState:
        return RouteState(
            self.specs[i],
            float(self.drift[i, 0]),
            float(self.drift[i, 1]),
            (float(self.held[i, 0]), float(self.held[i, 1])),
            (float(self.anchor[i, 0]), float(self.anchor[i, 1])),
            (float(self.relax[i, 0]), float(self.relax[i, 1])),
        )

    @property
    def delta_ps(self) -> np.ndarray:
        return self.drift[:, 1] - self.drift[:, 0]

    def delays(self) -> tuple[np.ndarray, np.ndarray]:
        nominal = np.array([s.nominal_delay_ps for s in self.specs])
        return nominal + self.drift[:, 0], nominal + self.drift[:, 1]

    def evolve(self, values, dt: float, scales, params: ModelParams = DEFAULT_PARAMS) -> RouteBank:
        """Hold ``values[i]`` on route ``i`` for ``dt`` hours; ``scales`` from
        :func:`stress_scale` per route."""
        if not dt >= 0:
            raise ContractError(f"negative segment duration {dt!r}")
        if dt == 0:
            return self
        values = np.asarray(values)
        drift, anchor, relax = _advance(
            self.drift, self.anchor, self.relax, self.held.sum(axis=1), values, dt,
            np.asarray(scales, float), params,
        )
        held = self.held.copy()
        held[np.arange(len(values)), values] += dt
        return RouteBank(self.specs, drift, anchor, relax, held)
