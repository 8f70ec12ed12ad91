"""Acceptance criteria, one test per criterion.

Each test prints a ``[Cn] PASS|FAIL`` line with the measured figures and then
asserts the criterion at its stated tolerance.  Run with ``-s`` or read the
lines from the terminal summary; they are printed outside output capture.
"""

import re
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from pentimento.bti import DEFAULT_PARAMS, Environment, RouteSpec, StressSegment, evolve, fresh
from pentimento.calibration import LAB_ANCHORS, burn_then_complement, crossing_hours
from pentimento.experiment import (
    STANDARD_LENGTHS_PS,
    BurnVector,
    experiment2,
    experiment3,
    fleet_theta_table,
    run_schedule,
    standard_route_set,
)
from pentimento.recovery import classify_tm1, classify_tm2, score
from pentimento.tdc import (
    CaptureSnapshot,
    Polarity,
    SensorConfig,
    capture,
    hamming_distance,
)

SEEDS = range(20)
ROUTES = standard_route_set()
CLOUD_BOUNDS = {1000.0: 0.2, 2000.0: 0.4, 5000.0: 1.0, 10000.0: 2.0}


@pytest.fixture
def report(capsys):
    def emit(n, name, ok, detail):
        with capsys.disabled():
            print(f"\n[C{n}] {'PASS' if ok else 'FAIL'} {name}: {detail}")
        assert ok, detail

    return emit


def burn(k):
    return BurnVector.random(64, k)


def signed(delta, b):
    # sign-adjusted so a correct burn response is positive
    return delta * np.where(np.array(b.bits) == 1, 1.0, -1.0)


@pytest.fixture(scope="module")
def cloud_burn_runs():
    env = Environment.cloud()
    return [(run_schedule(ROUTES, burn(k), experiment2(), env, k), burn(k)) for k in SEEDS]


def test_c1_lab_burn_in_anchors(report):
    t0 = time.perf_counter()
    vals = []
    for k in SEEDS:
        s = run_schedule(ROUTES, burn(k), experiment2(hours_per_step=200.0), Environment.lab(), k)
        assert s.hours[-1] == 200.0
        vals.append(signed(s.delta_ps[:, -1], burn(k)))
    elapsed = time.perf_counter() - t0
    mean = np.mean(vals, axis=0)
    lengths = np.array([r.nominal_delay_ps for r in ROUTES])
    inside = np.array([LAB_ANCHORS[L][0] <= m <= LAB_ANCHORS[L][1] for L, m in zip(lengths, mean)])
    ranges = ", ".join(
        f"{L:g}ps [{mean[lengths == L].min():.3f}, {mean[lengths == L].max():.3f}]" for L in STANDARD_LENGTHS_PS
    )
    ok = inside.all() and elapsed < 10.0
    report(1, "lab 200 h anchors", ok, f"{inside.sum()}/64 routes inside; {ranges}; {elapsed:.2f} s")


def test_c2_recovery_asymmetry(report):
    t0 = time.perf_counter()
    env = Environment.lab()
    details, ok = [], True
    for L in STANDARD_LENGTHS_PS:
        # burn-1: first hour with |delta| <= 0.5 under hourly complement conditioning
        s = evolve(fresh(RouteSpec("r", L)), StressSegment(200.0, 1, env))
        hour = None
        for h in range(1, 201):
            s = evolve(s, StressSegment(1.0, 0, env))
            if abs(s.delta_ps) <= 0.5:
                hour = h
                break
        exact = crossing_hours(L, DEFAULT_PARAMS)
        zero_left = abs(burn_then_complement(L, 0, 200.0, 200.0, DEFAULT_PARAMS))
        ok &= hour is not None and 30 <= exact <= 50 and 30 <= hour <= 50 and zero_left > 0.5
        details.append(f"{L:g}ps burn-1 {exact:.1f} h, burn-0 |d|@+200h {zero_left:.2f} ps")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 10.0
    report(2, "recovery asymmetry", ok, "; ".join(details) + f"; {elapsed:.2f} s")


def test_c3_cloud_attenuation(report, cloud_burn_runs):
    per_seed = []
    for s, b in cloud_burn_runs:
        d = signed(s.delta_ps[:, s.hours == 200.0][:, 0], b)
        per_seed.append([d[s.lengths_ps == L].mean() for L in STANDARD_LENGTHS_PS])
    means = np.mean(per_seed, axis=0)
    ok = all(0 < m <= CLOUD_BOUNDS[L] for L, m in zip(STANDARD_LENGTHS_PS, means))
    detail = ", ".join(f"{L:g}ps {m:.3f} (<= {CLOUD_BOUNDS[L]:g})" for L, m in zip(STANDARD_LENGTHS_PS, means))
    report(3, "cloud attenuation", ok, detail)


def test_c4_tm1_end_to_end(report, cloud_burn_runs):
    acc = [score(classify_tm1(s), b).accuracy for s, b in cloud_burn_runs]
    perfect = sum(a == 1.0 for a in acc)
    ok = np.mean(acc) >= 0.99
    report(4, "TM1 accuracy", ok, f"mean {np.mean(acc):.4f} over 20 seeds, {perfect} perfect runs, min {min(acc):.4f}")


def test_c5_tm2_end_to_end(report):
    env = Environment.cloud()
    table = fleet_theta_table(ROUTES, SensorConfig(), env)
    acc, per_class = [], []
    for k in SEEDS:
        s = run_schedule(ROUTES, burn(k), experiment3(), env, k, theta_table=table)
        assert len(s) == 25
        v = classify_tm2(s)
        pred = np.array([x.predicted_bit for x in v])
        truth = np.array(burn(k).bits)
        long = s.lengths_ps >= 2000
        acc.append(np.mean(pred[long] == truth[long]))
        per_class.append([np.mean((pred == truth)[s.lengths_ps == L]) for L in STANDARD_LENGTHS_PS])
    cls = np.mean(per_class, axis=0)
    detail = f"mean {np.mean(acc):.4f} on routes >= 2000 ps (" + ", ".join(
        f"{L:g}ps {a:.3f}" for L, a in zip(STANDARD_LENGTHS_PS, cls)
    ) + ")"
    report(5, "TM2 accuracy", np.mean(acc) >= 0.9, detail)


def test_c6_decode_oracle(report):
    rng = np.random.default_rng(6)
    mismatches = 0
    for _ in range(1000):
        bits = rng.random(64) < rng.random()
        pol = Polarity.RISING if rng.random() < 0.5 else Polarity.FALLING
        snap = CaptureSnapshot(bits, pol)
        brute = sum(int(x) for x in bits) if pol is Polarity.RISING else sum(1 - int(x) for x in bits)
        mismatches += hamming_distance(snap) != brute
    cfg = SensorConfig(metastable_band=0, tau_variation_sigma=0.0)
    quiet = Environment.lab(noise_sigma_ps=0.0)
    route = fresh(RouteSpec("r", 2000.0))
    worst = 0.0
    for _ in range(500):
        budget = float(rng.uniform(0.0, 64 * 2.8 - 1e-6))
        for pol in Polarity:
            d = hamming_distance(capture(route, cfg, pol, int(rng.integers(1 << 30)), 2000.0 + budget, quiet))
            worst = max(worst, abs(d * 2.8 - budget))
    ok = mismatches == 0 and worst < 2.8
    report(6, "decode oracle", ok, f"{mismatches} popcount mismatches in 1000; worst round-trip error {worst:.3f} ps")


def test_c7_property_suites(report):
    path = Path(__file__).with_name("test_properties.py")
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", str(path), "-q", "-p", "no:cacheprovider", "--hypothesis-show-statistics"],
        capture_output=True,
        text=True,
    )
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    passing = [int(x) for x in re.findall(r"(\d+) passing examples", proc.stdout)]
    ok = proc.returncode == 0 and passing and min(passing) >= 200
    report(7, "property suites", ok, f"{tail}; fewest generated cases per property {min(passing) if passing else 0}")


def _bits(ones):
    b = np.zeros(64, dtype=bool)
    b[list(ones)] = True
    return b


def test_c8_worked_example(report):
    quartet = [
        CaptureSnapshot(_bits(range(39)), Polarity.RISING),
        CaptureSnapshot(~_bits(list(range(21)) + [22]), Polarity.FALLING),
        CaptureSnapshot(_bits(list(range(36)) + [36, 39]), Polarity.RISING),
        CaptureSnapshot(~_bits(list(range(20)) + [20, 22]), Polarity.FALLING),
    ]
    got = [hamming_distance(s) for s in quartet]
    report(8, "snapshot quartet", got == [39, 22, 38, 22], f"decoded {got}")
