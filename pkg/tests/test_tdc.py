import io

import numpy as np
import pytest

from pentimento.bti import Environment, Polarity, RouteSpec, RouteState, StressSegment, evolve, fresh, true_delay
from pentimento.tdc import (
    CalibrationError,
    CaptureSnapshot,
    MeasurementError,
    SensorArray,
    SensorConfig,
    TDCSensor,
    Trace,
    calibrate,
    capture,
    hamming_distance,
    measure_route,
    noise_floor_ps,
    read_trace_dump,
    write_trace_dump,
)

QUIET = SensorConfig(metastable_band=0, tau_variation_sigma=0.0)
LAB = Environment.lab()
NOISELESS = Environment.lab(noise_sigma_ps=0.0)


def bits_from(ones):
    b = np.zeros(64, dtype=bool)
    b[list(ones)] = True
    return b


def test_worked_example_quartet_decodes():
    # rising 0 reaches output 38; falling 0 ends between 21 and 23 with a
    # metastable bit; rising 1 ends between 36 and 39; falling 1 between 20 and 23
    rising0 = CaptureSnapshot(bits_from(range(39)), Polarity.RISING)
    falling0 = CaptureSnapshot(~bits_from(list(range(21)) + [22]), Polarity.FALLING)
    rising1 = CaptureSnapshot(bits_from(list(range(36)) + [36, 39]), Polarity.RISING)
    falling1 = CaptureSnapshot(~bits_from(list(range(20)) + [20, 22]), Polarity.FALLING)
    quartet = [rising0, falling0, rising1, falling1]
    assert [hamming_distance(s) for s in quartet] == [39, 22, 38, 22]


def test_hamming_distance_matches_popcount(rng):
    for _ in range(1000):
        value = int(rng.integers(0, 2**63)) | (int(rng.integers(0, 2)) << 63)
        pol = Polarity.RISING if rng.random() < 0.5 else Polarity.FALLING
        snap = CaptureSnapshot.from_hex(f"{value:016x}", pol)
        ones = bin(value).count("1")
        assert hamming_distance(snap) == (ones if pol is Polarity.RISING else 64 - ones)


def test_hex_round_trip(rng):
    for _ in range(50):
        bits = rng.random(64) < 0.5
        snap = CaptureSnapshot(bits, Polarity.FALLING)
        back = CaptureSnapshot.from_hex(snap.to_hex(), Polarity.FALLING)
        assert np.array_equal(back.bits, bits)


def test_budget_of_39_elements_sets_first_39_bits():
    route = fresh(RouteSpec("r", 1000))
    theta = 1000.0 + 39 * 2.8 + 0.5  # inside element 39
    snap = capture(route, QUIET, Polarity.RISING, 0, theta, NOISELESS)
    assert np.array_equal(snap.bits, bits_from(range(39)))
    assert hamming_distance(snap) == 39


def test_noise_free_round_trip_within_one_element(rng):
    route = fresh(RouteSpec("r", 2000))
    for _ in range(200):
        budget = float(rng.uniform(0, 64 * 2.8 - 1e-6))
        theta = 2000.0 + budget
        for pol in Polarity:
            d = hamming_distance(capture(route, QUIET, pol, 0, theta, NOISELESS))
            assert abs(d * 2.8 - budget) < 2.8


def test_ideal_snapshots_are_monotone_runs():
    sensor = TDCSensor(SensorConfig(metastable_band=0), 3)
    route = fresh(RouteSpec("r", 1000))
    for theta in np.arange(1000, 1180, 7.0):
        for pol in Polarity:
            bits = sensor.capture(route, pol, theta, NOISELESS).bits
            lead = bits[0] if bits.any() != bits.all() else bits[0]
            change = np.flatnonzero(bits != bits[0])
            if len(change):
                assert np.all(bits[change[0]:] != bits[0])
            assert lead == bits[0]


def test_bubbles_stay_inside_band_and_keep_distance():
    cfg = SensorConfig(metastable_band=2, flip_probability=1.0)
    sensor = TDCSensor(cfg, 5)
    for count in range(2, 62):
        snap = sensor._snapshot(count, Polarity.RISING)
        assert hamming_distance(snap) == count
        ideal = bits_from(range(count))
        diff = np.flatnonzero(snap.bits != ideal)
        assert np.all(np.abs(diff - count + 0.5) <= 2)


def test_front_clamps_to_chain():
    sensor = TDCSensor(QUIET, 0)
    assert sensor.front(-50.0) == 0
    assert sensor.front(1e6) == 64
    assert sensor.distances(np.array([-1.0, 1e6])).tolist() == [0, 64]


def test_theta_shift_moves_front_by_whole_elements():
    sensor = TDCSensor(QUIET, 0)
    base = 40.3
    for k in range(-10, 10):
        assert sensor.front(base + k * 2.8) == pytest.approx(
            np.clip(sensor.front(base) + k, 0, 64)
        )


def test_calibration_places_both_fronts_inside():
    route = fresh(RouteSpec("r", 5000))
    sensor = TDCSensor(SensorConfig(), 7)
    theta = sensor.calibrate(route, LAB)
    for pol in Polarity:
        budget = theta - true_delay(route, pol)
        assert 0 < budget < 64 * 2.8
    # the step above theta still saturates at least one sample
    assert theta == pytest.approx(SensorConfig().snap_theta(theta))


def test_calibration_noise_free_closed_form():
    route = fresh(RouteSpec("r", 1000))
    theta = calibrate(route, QUIET, 0, NOISELESS)
    # the first phase from the top whose budget is strictly inside the chain
    expect = np.floor((1000 + 64 * 2.8 - 1e-6) / 2.8) * 2.8
    assert theta == pytest.approx(expect)


def test_calibration_fails_when_route_is_too_long():
    cfg = SensorConfig(theta_max_ps=500.0)
    with pytest.raises(CalibrationError):
        calibrate(fresh(RouteSpec("r", 1000)), cfg, 0, LAB)


def test_measurement_matches_model_delta_noise_free():
    state = evolve(fresh(RouteSpec("r", 2000)), StressSegment(200, 1, LAB))
    sensor = TDCSensor(SensorConfig(), 11)
    theta = sensor.calibrate(state, NOISELESS)
    rise, fall = sensor.measure_route(state, theta, 10, NOISELESS)
    assert abs((fall - rise) - state.delta_ps) <= 0.3


def test_measurement_is_unbiased_over_seeds():
    state = evolve(fresh(RouteSpec("r", 1000)), StressSegment(200, 1, LAB))
    errs = []
    for seed in range(100):
        sensor = TDCSensor(SensorConfig(), seed)
        theta = sensor.calibrate(state, LAB)
        rise, fall = sensor.measure_route(state, theta, 10, LAB)
        errs.append(fall - rise - state.delta_ps)
    assert abs(np.mean(errs)) < 0.1
    # spread agrees with the analytic noise floor
    assert np.std(errs) == pytest.approx(noise_floor_ps(SensorConfig(), LAB), rel=0.3)


def test_saturated_measurement_raises():
    route = fresh(RouteSpec("r", 1000))
    with pytest.raises(MeasurementError):
        measure_route(route, SensorConfig(), theta_init=500.0, rng_seed=0, env=LAB)


def test_sensor_array_matches_individual_sensors():
    specs = [RouteSpec(f"r{i}", L) for i, L in enumerate([1000, 2000, 5000, 10000])]
    states = [evolve(fresh(s), StressSegment(30 * (i + 1), i % 2, LAB)) for i, s in enumerate(specs)]
    seeds = np.random.SeedSequence(99).spawn(4)
    solo = [TDCSensor(SensorConfig(), s) for s in seeds]
    thetas = np.array([sen.calibrate(st, LAB) for sen, st in zip(solo, states)])
    twin = [TDCSensor(SensorConfig(), s) for s in seeds]
    for sen, st in zip(twin, states):
        sen.calibrate(st, LAB)  # consume the same draws
    array = SensorArray(twin)
    rise = np.array([true_delay(s, Polarity.RISING) for s in states])
    fall = np.array([true_delay(s, Polarity.FALLING) for s in states])
    for _ in range(3):
        r_arr, f_arr = array.measure(rise, fall, thetas, np.full(4, LAB.noise_sigma_ps), 10)
        for i, (sen, st) in enumerate(zip(solo, states)):
            r, f = sen.measure_route(st, thetas[i], 10, LAB)
            assert r_arr[i] == pytest.approx(r, abs=1e-9)
            assert f_arr[i] == pytest.approx(f, abs=1e-9)


def test_same_seed_same_readings():
    route = evolve(fresh(RouteSpec("r", 2000)), StressSegment(50, 0, LAB))
    a = measure_route(route, SensorConfig(), 2150.0, rng_seed=4, env=LAB)
    b = measure_route(route, SensorConfig(), 2150.0, rng_seed=4, env=LAB)
    assert a == b


def test_trace_has_interleaved_polarities_and_dump_round_trip():
    sensor = TDCSensor(SensorConfig(), 2)
    route = fresh(RouteSpec("r", 1000))
    theta = sensor.calibrate(route, LAB)
    trace = sensor.trace(route, theta, LAB)
    assert len(trace.snapshots) == 32
    assert [s.polarity for s in trace.snapshots[:4]] == [Polarity.RISING, Polarity.FALLING] * 2
    buf = io.StringIO()
    write_trace_dump([trace], buf)
    rows = read_trace_dump(io.StringIO(buf.getvalue()))
    assert len(rows) == 32
    assert all(np.array_equal(s.bits, o.bits) for (_, _, s), o in zip(rows, trace.snapshots))
    assert isinstance(trace, Trace) and len(trace.distances(Polarity.RISING)) == 16


def test_noise_floor_formula():
    cfg = SensorConfig()
    expect = np.sqrt(2 * (0.25 + 2.8**2 / 6) / 160)
    assert noise_floor_ps(cfg, LAB) == pytest.approx(expect)


@pytest.mark.parametrize("extra", [280.0, 500.0, 1234.5])
def test_calibration_tracks_delay_difference(extra):
    a = calibrate(fresh(RouteSpec("a", 1000)), QUIET, 0, NOISELESS)
    b = calibrate(fresh(RouteSpec("b", 1000 + extra)), QUIET, 0, NOISELESS)
    steps = (b - a) / 2.8
    assert steps == pytest.approx(round(steps), abs=1e-6)
    assert abs(b - a - extra) < 2.8
    if extra % 2.8 < 1e-9 or 2.8 - extra % 2.8 < 1e-9:
        assert b - a == pytest.approx(extra)
