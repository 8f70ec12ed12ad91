"""Run the three standard experiments and write a CSV, an SVG and a short
summary for each.

    python3 scripts/run_experiments.py -o runs/ --seed 0 --hours-per-step 1
"""

import argparse
import io
import json
import time
from pathlib import Path

import numpy as np

from pentimento.bti import Environment
from pentimento.experiment import (
    STANDARD_LENGTHS_PS,
    BurnVector,
    experiment1,
    experiment2,
    experiment3,
    fleet_theta_table,
    run_schedule,
    standard_route_set,
    write_series_csv,
)
from pentimento.plotting import render_svg
from pentimento.recovery import classify_tm1, classify_tm2, score


def class_means(series, burn, hour):
    col = np.argmin(np.abs(series.hours - hour))
    sign = np.where(np.array(burn.bits) == 1, 1.0, -1.0)
    d = series.delta_ps[:, col] * sign
    return {f"{L:g}": float(d[series.lengths_ps == L].mean()) for L in STANDARD_LENGTHS_PS}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("-o", "--out", default="runs")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--burn-seed", type=int, default=7)
    ap.add_argument("--hours-per-step", type=float, default=1.0)
    args = ap.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    routes = standard_route_set()
    burn = BurnVector.random(len(routes), args.burn_seed)
    lab, cloud = Environment.lab(), Environment.cloud()
    hps = args.hours_per_step

    runs = {
        "experiment1": (experiment1(hps), lab, None, [(0, 200)]),
        "experiment2": (experiment2(hps), cloud, None, [(0, 200)]),
        "experiment3": (experiment3(hps), cloud, fleet_theta_table(routes, env=cloud), []),
    }
    summary = {}
    for name, (schedule, env, table, shade) in runs.items():
        t0 = time.perf_counter()
        series = run_schedule(routes, burn, schedule, env, args.seed, theta_table=table)
        buf = io.StringIO()
        write_series_csv(buf, series, burn)
        (out / f"{name}.csv").write_text(buf.getvalue())
        (out / f"{name}.svg").write_text(render_svg(series, burn, name, shade))
        info = {"points": len(series), "seconds": round(time.perf_counter() - t0, 3)}
        if name == "experiment1":
            info["delta_at_200h"] = class_means(series, burn, 200.0)
            info["delta_at_400h"] = class_means(series, burn, 400.0)
        elif name == "experiment2":
            info["delta_at_200h"] = class_means(series, burn, 200.0)
            info["tm1"] = score(classify_tm1(series), burn, series.lengths_ps).to_dict()
        else:
            info["tm2"] = score(classify_tm2(series), burn, series.lengths_ps).to_dict()
        summary[name] = info
        print(f"{name}: {info['points']} points in {info['seconds']} s")
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
