"""Command-line entry point: ``pentimento <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 model or
calibration failure.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import os
import sys
from importlib import resources
from pathlib import Path

from . import assets, recovery
from .bti import ContractError, Environment
from .calibration import LAB_ANCHORS, fit_model
from .experiment import (
    PRESETS,
    ScheduleError,
    SchemaError,
    fleet_theta_table,
    read_series_csv,
    run_schedule,
    write_series_csv,
)
from .plotting import render_svg
from .runconfig import ConfigError, load_config
from .tdc import CalibrationError, MeasurementError, SensorConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_MODEL = 0, 1, 2, 3
SEED_ENV = "PENTIMENTO_SEED"
DEFAULT_SEED = 0


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def bundled(name: str) -> Path:
    """Path of a file shipped in ``pentimento/data``."""
    return Path(str(resources.files("pentimento") / "data" / name))


def _read_text(path: str) -> tuple[str, str]:
    p = Path(path)
    if not p.exists() and os.sep not in path and bundled(path).exists():
        p = bundled(path)
    try:
        return p.read_text(), str(path)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def resolve_seed(cli_seed, config_seed) -> tuple[int, str]:
    """CLI flag, then config value, then ``PENTIMENTO_SEED``, then 0."""
    if cli_seed is not None:
        return cli_seed, "cli"
    if config_seed is not None:
        return config_seed, "config"
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            return int(env), "env"
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return DEFAULT_SEED, "default"


def _write(path: str, text: str) -> bytes:
    data = text.encode()
    with open(path, "wb") as fh:
        fh.write(data)
    return data


# -- subcommands --------------------------------------------------------


def cmd_simulate(args) -> int:
    text, source = _read_text(args.config)
    try:
        cfg = load_config(text, source)
    except ConfigError as exc:
        raise DataError(str(exc)) from None
    seed, seed_source = resolve_seed(args.seed, cfg.seed)
    hps = cfg.extra["hours_per_step"]
    schedule = cfg.schedule
    if args.hours_per_step is not None:
        if args.hours_per_step <= 0:
            raise UsageError("--hours-per-step must be > 0")
        if cfg.schedule_name not in PRESETS:
            raise UsageError("--hours-per-step only applies to preset schedules")
        hps = args.hours_per_step
        schedule = PRESETS[cfg.schedule_name](hours_per_step=hps)
    table = None
    if cfg.theta == "fleet":
        table = fleet_theta_table(cfg.routes, SensorConfig(), cfg.env)
    series = run_schedule(
        cfg.routes, cfg.burn, schedule, cfg.env, seed, theta_table=table, n_traces=cfg.n_traces
    )
    buf = io.StringIO()
    write_series_csv(buf, series, None if args.no_truth else cfg.burn)
    data = _write(args.out, buf.getvalue())
    manifest = {
        "config": os.path.basename(source),
        "config_sha256": cfg.digest,
        "schedule": cfg.schedule_name,
        "hours_per_step": hps,
        "regime": cfg.env.regime.value,
        "seed": seed,
        "seed_source": seed_source,
        "routes": len(cfg.routes),
        "start_hour": float(series.hours[0]) if len(series) else 0.0,
        "end_hour": schedule.total_hours,
        "outputs": [{"path": os.path.basename(args.out), "sha256": _sha256(data)}],
    }
    manifest_path = args.manifest or args.out + ".manifest.json"
    _write(manifest_path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {args.out} ({len(series)} points x {len(cfg.routes)} routes), seed {seed}")
    return EXIT_OK


def _load_series(path):
    text, _ = _read_text(path)
    try:
        return read_series_csv(io.StringIO(text))
    except SchemaError as exc:
        raise DataError(f"{path}: {exc}") from None


def cmd_attack(args) -> int:
    series, truth = _load_series(args.csv)
    if args.mode == "tm1":
        window = series.until(args.burn_hours)
        bw = args.bandwidth or recovery.TM1_BANDWIDTH_H
        classify = recovery.classify_tm1
    else:
        window = series.window(args.acquired_at)
        bw = args.bandwidth or recovery.TM2_BANDWIDTH_H
        classify = recovery.classify_tm2
    try:
        verdicts = classify(window, bw)
    except recovery.InsufficientDataError as exc:
        raise DataError(f"{args.csv}: {exc}") from None
    report = recovery.score(verdicts, truth, series.lengths_ps) if truth is not None else None
    out = args.out or "verdicts.csv"
    buf = io.StringIO()
    recovery.write_verdicts_csv(buf, verdicts)
    _write(out, buf.getvalue())
    summary = args.summary or out.rsplit(".", 1)[0] + ".summary.json"
    buf = io.StringIO()
    recovery.write_summary(buf, args.mode, verdicts, report)
    _write(summary, buf.getvalue())
    if report is not None:
        per = ", ".join(f"{k:g}ps={v:.3f}" for k, v in sorted(report.per_class.items()))
        print(f"{args.mode}: accuracy {report.accuracy:.4f} over {report.n} routes ({per})")
    else:
        print(f"{args.mode}: {len(verdicts)} verdicts, no ground truth in input")
    return EXIT_OK


def cmd_profile(args) -> int:
    text, _ = _read_text(args.csv)
    try:
        records = assets.read_inventory(io.StringIO(text))
    except ValueError as exc:
        raise DataError(f"{args.csv}: {exc}") from None
    if args.burn_hours < 0:
        raise UsageError("--burn-hours must be >= 0")
    env = Environment.cloud() if args.regime == "cloud" else Environment.lab()
    vulns = [assets.vulnerability(r, args.burn_hours, env) for r in records]
    buf = io.StringIO()
    assets.write_stats_csv(buf, records)
    _write(args.stats_out, buf.getvalue())
    buf = io.StringIO()
    assets.write_vulnerability_csv(buf, vulns)
    _write(args.vuln_out, buf.getvalue())
    print(f"profiled {len(records)} assets -> {args.stats_out}, {args.vuln_out}")
    return EXIT_OK


def cmd_plot(args) -> int:
    series, truth = _load_series(args.csv)
    shade = [(0.0, args.shade_until)] if args.shade_until else []
    try:
        svg = render_svg(series, truth, args.title or "", shade)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    _write(args.out, svg)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_calibrate_model(args) -> int:
    fit = fit_model()
    for line in fit.lines():
        print(line)
    ok = all(LAB_ANCHORS[L][0] <= d <= LAB_ANCHORS[L][1] for L, d in fit.anchor_delta_ps.items())
    ok &= all(30.0 <= h <= 50.0 for h in fit.crossing_hours.values())
    if not ok:
        print("calibration targets not met", file=sys.stderr)
        return EXIT_MODEL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="pentimento", description="BTI data-remanence simulator and attack toolkit")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run a configured schedule and write the delay CSV")
    p.add_argument("config", help="config file, or the name of a bundled one (experiment1.cfg ...)")
    p.add_argument("-o", "--out", default="series.csv")
    p.add_argument("--manifest", help="manifest path (default: OUT.manifest.json)")
    p.add_argument("--seed", type=int)
    p.add_argument("--hours-per-step", type=float)
    p.add_argument("--no-truth", action="store_true", help="omit the burn_bit column")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("attack", help="classify burned bits from a delay CSV")
    p.add_argument("csv")
    p.add_argument("--mode", choices=("tm1", "tm2"), required=True)
    p.add_argument("--acquired-at", type=float, default=200.0, help="tm2: first hour of the window")
    p.add_argument("--burn-hours", type=float, default=200.0, help="tm1: last hour of the window")
    p.add_argument("--bandwidth", type=float, help="kernel bandwidth in hours")
    p.add_argument("-o", "--out", help="verdict CSV (default verdicts.csv)")
    p.add_argument("--summary", help="summary JSON (default OUT.summary.json)")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("profile", help="route-length statistics and vulnerability per asset")
    p.add_argument("csv", help="inventory CSV, or opentitan_sample.csv for the bundled sample")
    p.add_argument("--burn-hours", type=float, default=200.0)
    p.add_argument("--regime", choices=("lab", "cloud"), default="lab")
    p.add_argument("--stats-out", default="asset_stats.csv")
    p.add_argument("--vuln-out", default="asset_vulnerability.csv")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("plot", help="SVG chart of Δps against hour")
    p.add_argument("csv")
    p.add_argument("-o", "--out", default="series.svg")
    p.add_argument("--title")
    p.add_argument("--shade-until", type=float, help="shade hours [0, H)")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("calibrate-model", help="refit the degradation constants to the lab anchors")
    p.set_defaults(func=cmd_calibrate_model)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"pentimento: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, SchemaError, ScheduleError) as exc:
        print(f"pentimento: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (CalibrationError, MeasurementError, ContractError) as exc:
        print(f"pentimento: model failure: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
