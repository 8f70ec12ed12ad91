"""Run configuration files (INI syntax, one ``[run]`` section).

Example::

    [run]
    lengths_ps = 1000*16, 2000*16, 5000*16, 10000*16
    burn_seed = 7
    schedule = experiment2
    regime = cloud
    seed = 11

Keys
    routes          route count; optional, must match ``lengths_ps`` if both given
    lengths_ps      ``standard`` or a comma list of lengths, ``L*n`` repeats L n times
    burn_seed       seed for a random burn vector, or
    burn_bits       explicit bit string such as ``0110...``
    schedule        a preset name (experiment1/2/3), or
    phases          explicit phases, one group per line (see ``parse_phases``)
    regime          lab or cloud
    seed            simulation seed (optional; see the CLI for precedence)
    hours_per_step  condition granularity for presets (default 1)
    theta           ``calibrate`` (use the schedule's Calibrate) or ``fleet``
    n_traces        traces per measurement (default 10)
    temperature_c, device_age_factor, noise_sigma_ps   environment overrides
"""

from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import dataclass, field

from .bti import Environment, RouteSpec
from .experiment import (
    PRESETS,
    BurnVector,
    Calibrate,
    Condition,
    Measure,
    Phase,
    Schedule,
    ScheduleError,
    standard_route_set,
)

SECTION = "run"
KNOWN_KEYS = {
    "routes", "lengths_ps", "burn_seed", "burn_bits", "schedule", "phases", "regime", "seed",
    "hours_per_step", "theta", "n_traces", "temperature_c", "device_age_factor", "noise_sigma_ps",
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    routes: list[RouteSpec]
    burn: BurnVector
    schedule: Schedule
    env: Environment
    seed: int | None
    theta: str = "calibrate"
    n_traces: int = 10
    schedule_name: str = "custom"
    digest: str = ""
    extra: dict = field(default_factory=dict)


def _line_of(text: str, key: str) -> int:
    pat = re.compile(rf"^\s*{re.escape(key)}\s*[=:]", re.IGNORECASE)
    for i, line in enumerate(text.splitlines(), 1):
        if pat.match(line):
            return i
    return 0


def parse_lengths(value: str) -> list[float]:
    if value.strip().lower() == "standard":
        return [r.nominal_delay_ps for r in standard_route_set()]
    out: list[float] = []
    for item in value.split(","):
        item = item.strip()
        if not item:
            continue
        if "*" in item:
            L, n = item.split("*", 1)
            out += [float(L)] * int(n)
        else:
            out.append(float(item))
    if not out:
        raise ValueError("no lengths given")
    return out


_CONDITION = re.compile(r"^condition\s+(~X|X|0|1)\s+([0-9.eE+-]+)\s*h?$", re.IGNORECASE)
_REPEAT = re.compile(r"^repeat\s+(\d+)\s*:\s*(.+)$", re.IGNORECASE)


def _parse_item(item: str) -> Phase:
    low = item.strip().lower()
    if low == "calibrate":
        return Calibrate()
    if low == "measure":
        return Measure()
    m = _CONDITION.match(item.strip())
    if m:
        source = m.group(1).upper() if m.group(1).lower() in ("x", "~x") else m.group(1)
        return Condition(source, float(m.group(2)))
    raise ValueError(f"unknown phase {item.strip()!r}")


def parse_phases(text: str) -> tuple[Phase, ...]:
    """One group per line: ``calibrate``, ``measure``, ``condition X 1``
    (source X, ~X, 0 or 1; hours), or ``repeat N: item; item; ...``."""
    phases: list[Phase] = []
    for line in text.strip().splitlines():
        line = line.strip()
        if not line:
            continue
        m = _REPEAT.match(line)
        if m:
            body = [_parse_item(p) for p in m.group(2).split(";") if p.strip()]
            phases += body * int(m.group(1))
        else:
            phases += [_parse_item(p) for p in line.split(";") if p.strip()]
    return tuple(phases)


def load_config(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if not parser.has_section(SECTION):
        raise ConfigError(f"{source}: missing [{SECTION}] section")
    sec = parser[SECTION]

    def fail(key, msg):
        line = _line_of(text, key)
        where = f"{source}:{line}" if line else source
        raise ConfigError(f"{where}: {key}: {msg}")

    for key in sec:
        if key not in KNOWN_KEYS:
            fail(key, "unknown key")

    def get(key, conv, default=None):
        if key not in sec:
            return default
        try:
            return conv(sec[key])
        except (ValueError, ScheduleError) as exc:
            fail(key, exc)

    lengths = get("lengths_ps", parse_lengths)
    count = get("routes", int)
    if lengths is None:
        lengths = [r.nominal_delay_ps for r in standard_route_set()]
        if count is not None and count != len(lengths):
            fail("routes", "give lengths_ps for a non-standard route count")
    elif count is not None and count != len(lengths):
        fail("routes", f"{count} routes but {len(lengths)} lengths")
    try:
        routes = [RouteSpec(f"r{i:02d}", L) for i, L in enumerate(lengths)]
    except ValueError as exc:
        fail("lengths_ps", exc)

    if ("burn_seed" in sec) == ("burn_bits" in sec):
        fail("burn_seed" if "burn_seed" in sec else "burn_bits", "give exactly one of burn_seed, burn_bits")
    if "burn_bits" in sec:
        bits = sec["burn_bits"].replace(" ", "").replace(",", "")
        if any(c not in "01" for c in bits):
            fail("burn_bits", "bits must be 0 or 1")
        burn = BurnVector(tuple(int(c) for c in bits))
    else:
        burn = BurnVector.random(len(routes), get("burn_seed", int))
    if len(burn) != len(routes):
        fail("burn_bits", f"{len(burn)} bits for {len(routes)} routes")

    hps = get("hours_per_step", float, 1.0)
    if not hps > 0:
        fail("hours_per_step", "must be > 0")
    if ("schedule" in sec) == ("phases" in sec):
        fail("schedule" if "schedule" in sec else "phases", "give exactly one of schedule, phases")
    if "schedule" in sec:
        name = sec["schedule"].strip().lower()
        if name not in PRESETS:
            fail("schedule", f"unknown preset {name!r} (choose from {', '.join(PRESETS)})")
        schedule = PRESETS[name](hours_per_step=hps)
    else:
        name = "custom"
        schedule = Schedule(get("phases", parse_phases))

    regime = sec.get("regime", "lab").strip().lower()
    env_kw = {}
    for key in ("temperature_c", "device_age_factor", "noise_sigma_ps"):
        if key in sec:
            env_kw[key] = get(key, float)
    try:
        if regime == "lab":
            env = Environment.lab(**env_kw)
        elif regime == "cloud":
            env = Environment.cloud(**env_kw)
        else:
            fail("regime", "must be lab or cloud")
    except ValueError as exc:
        fail("regime", exc)

    theta = sec.get("theta", "calibrate").strip().lower()
    if theta not in ("calibrate", "fleet"):
        fail("theta", "must be calibrate or fleet")
    n_traces = get("n_traces", int, 10)
    if n_traces < 1:
        fail("n_traces", "must be >= 1")

    return RunConfig(
        routes=routes,
        burn=burn,
        schedule=schedule,
        env=env,
        seed=get("seed", int),
        theta=theta,
        n_traces=n_traces,
        schedule_name=name,
        digest=hashlib.sha256(text.encode()).hexdigest(),
        extra={"hours_per_step": hps},
    )
