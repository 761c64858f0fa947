import numpy as np
import pytest

from msab.core import BearingRangeSensor, LinearGaussianSensor
from msab.sim import (
    ConfigError,
    ScenarioConfig,
    build_sensors,
    desk_config,
    fixed_schedule,
    generate_measurements,
    generate_scans,
    generate_truth,
    load_config,
    validate_config,
    write_measurements_csv,
    write_truth_csv,
)

from conftest import WINDOW


def test_straight_lines_without_noise():
    cfg = desk_config("bearing", process_noise=[0.0, 0.0], birth_period=1000, max_births=3, duration_steps=10)
    sc = ScenarioConfig.from_config(cfg, 2)
    truth = generate_truth(sc, np.random.default_rng(2))
    for lab, tr in truth.tracks().items():
        steps = sorted(tr)
        if len(steps) > 2:
            d = np.diff(np.array([tr[k] for k in steps]), axis=0)
            np.testing.assert_allclose(d, np.broadcast_to(d[0], d.shape), atol=1e-6)


def test_truth_is_deterministic():
    sc = ScenarioConfig.from_config(desk_config("position"), 0)
    a = generate_truth(sc, np.random.default_rng(5))
    b = generate_truth(sc, np.random.default_rng(5))
    assert a.birth_step == b.birth_step
    for sa, sb in zip(a.steps, b.steps):
        assert sa.keys() == sb.keys()
        for lab in sa:
            np.testing.assert_array_equal(sa[lab], sb[lab])


def test_position_schedule_peaks_at_22():
    plan = fixed_schedule(100)
    assert len(plan) == 26
    sites = np.array([p[2][[0, 2]] for p in plan])
    assert fixed_schedule(100)[0][2].tolist() == plan[0][2].tolist()
    d = np.linalg.norm(sites[:, None] - sites[None], axis=-1) + np.eye(26) * 1e9
    assert d.min() >= 500.0
    sc = ScenarioConfig.from_config(desk_config("position", duration_steps=100, process_noise=[0.0, 0.0]), 0)
    truth = generate_truth(sc, np.random.default_rng(0))
    assert truth.cardinality().max() == 22


def test_lagged_cardinality():
    sc = ScenarioConfig.from_config(desk_config("position"), 0)
    truth = generate_truth(sc, np.random.default_rng(0))
    lag = truth.cardinality_lagged(1)
    assert lag[0] == 0 and np.all(lag <= truth.cardinality())


def test_no_detection_no_clutter_gives_empty_scans(rng):
    sen = LinearGaussianSensor.position(10.0, 0.0, 0.0, WINDOW)
    scans = generate_measurements([np.zeros(4)] * 3, [sen, sen], rng)
    assert [len(z) for z in scans] == [0, 0]


def test_clutter_count_mean(rng):
    sen = LinearGaussianSensor.position(10.0, 0.95, 15.0, WINDOW)
    counts = [len(generate_measurements([], [sen], rng)[0]) for _ in range(10 ** 4)]
    assert abs(np.mean(counts) - 15.0) < 0.5


def test_bearing_measurement_round_trip(rng):
    cfg = desk_config("bearing")
    cfg["scenario"]["clutter_rate"] = 0.0
    cfg["scenario"]["detection_prob"] = 1.0 - 1e-12
    sensors = build_sensors(cfg)
    assert all(isinstance(s, BearingRangeSensor) for s in sensors)
    x = np.array([4000.0, 0.0, 6000.0, 0.0])
    for _ in range(50):
        scans = generate_measurements([x], sensors, rng)
        for s, z in zip(sensors, scans):
            r = s.residual(z[0], s.h(x)[0])
            assert np.all(np.abs(r) <= 3 * np.sqrt(np.diag(s.R)) + 1e-12) or np.abs(r).max() < 5 * np.sqrt(s.R.max())


def test_config_errors_name_the_key(tmp_path):
    with pytest.raises(ConfigError) as e:
        validate_config({"scenario": {"clutter_rate": -1}})
    assert "scenario.clutter_rate" in str(e.value)
    with pytest.raises(ConfigError) as e:
        validate_config({"tracker": {"bogus": 1}})
    assert "tracker.bogus" in str(e.value)
    p = tmp_path / "c.yaml"
    p.write_text("scenario: [1, 2\n")
    with pytest.raises(ConfigError):
        load_config(p)


def test_csv_writers(tmp_path):
    sc = ScenarioConfig.from_config(desk_config("position", duration_steps=5), 0)
    rng = np.random.default_rng(0)
    truth = generate_truth(sc, rng)
    scans = generate_scans(truth, build_sensors(desk_config("position")), rng)
    write_truth_csv(tmp_path / "t.csv", truth)
    write_measurements_csv(tmp_path / "m.csv", scans)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "step,label,px,vx,py,vy"
    assert len(lines) == 1 + sum(len(s) for s in truth.steps)
