import functools

import numpy as np
import pytest
import yaml

from msab import oracle
from msab.cli import bench_scaling, main, run_trials, trial_streams

TINY = {"scenario": {"kind": "position", "duration_steps": 6, "clutter_rate": 2.0},
        "birth": {"gibbs_iterations": 50, "restart_period": 10}}


@pytest.fixture
def tiny_config(tmp_path):
    p = tmp_path / "tiny.yaml"
    p.write_text(yaml.safe_dump(TINY))
    return p


@pytest.mark.parametrize("birth", ["uniform", "adaptive-gaussian"])
def test_simulate_is_byte_identical(tiny_config, tmp_path, birth):
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["simulate", str(tiny_config), "--birth", birth, "--trials", "1", "--seed", "7",
                     "--out", str(out)]) == 0
        outs.append(out)
    for name in ("trials.csv", "average.csv", "manifest.yaml"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    header = (outs[0] / "trials.csv").read_text().splitlines()[0]
    assert "lagged_cardinality_error" in header and "ospa2" in header


def test_simulate_mc_birth_runs(tiny_config, tmp_path):
    assert main(["simulate", str(tiny_config), "--birth", "adaptive-mc", "--out", str(tmp_path / "mc")]) == 0


def test_results_independent_of_thread_count(tiny_config, monkeypatch):
    from msab.sim import load_config

    cfg = load_config(tiny_config)
    monkeypatch.setenv("MSAB_THREADS", "1")
    serial = run_trials(cfg, "uniform", 3, seed=2)
    monkeypatch.setenv("MSAB_THREADS", "3")
    pooled = run_trials(cfg, "uniform", 3, seed=2)
    assert [r.rows for r in serial] == [r.rows for r in pooled]


def test_trial_streams_differ_per_trial():
    a, _ = trial_streams(1, 0)
    b, _ = trial_streams(1, 1)
    assert a.random() != b.random()


def test_malformed_config_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text(yaml.safe_dump({"scenario": {"detection_prob": 2.0}}))
    assert main(["simulate", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "scenario.detection_prob" in capsys.readouterr().err


def test_unknown_key_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text(yaml.safe_dump({"metrics": {"cutof": 100}}))
    assert main(["simulate", str(p)]) == 2
    assert "metrics.cutof" in capsys.readouterr().err


def test_gaussian_birth_rejects_bearing_sensors(tmp_path, capsys):
    p = tmp_path / "b.yaml"
    p.write_text(yaml.safe_dump({"scenario": {"kind": "bearing", "duration_steps": 3}}))
    assert main(["simulate", str(p), "--birth", "adaptive-gaussian", "--out", str(tmp_path / "o")]) == 2
    assert "scenario.kind" in capsys.readouterr().err


def test_bad_thread_env(tiny_config, tmp_path, monkeypatch):
    monkeypatch.setenv("MSAB_THREADS", "many")
    assert main(["simulate", str(tiny_config), "--trials", "2", "--out", str(tmp_path / "o")]) == 2


@pytest.mark.parametrize("case,suite,needle", [
    ("tv", "run_tv_suite", "threshold 0.05"),
    ("bound", "run_bound_suite", "violations over"),
    ("backend-xcheck", "run_backend_xcheck", "TV"),
])
def test_oracle_command_reports(case, suite, needle, monkeypatch, capsys):
    monkeypatch.setattr(oracle, suite, functools.partial(getattr(oracle, suite), n_instances=2))
    assert main(["oracle", "--case", case]) == 0
    out = capsys.readouterr().out
    assert out.startswith(f"{case}: PASS") and needle in out


def test_oracle_failure_exit_code(monkeypatch):
    monkeypatch.setattr(oracle, "run_tv_suite",
                        lambda seed: oracle.SuiteResult("tv", [1.0], 0.05, False, "forced"))
    assert main(["oracle", "--case", "tv"]) == 1


def test_bench_command_writes_csv(tmp_path, capsys):
    path = tmp_path / "b.csv"
    assert main(["bench", "--sensors", "2", "3", "--measurements", "4", "--gibbs-iters", "5",
                 "--instances", "1", "--repeats", "1", "--csv", str(path)]) == 0
    assert path.read_text().splitlines()[0] == "n_sensors,seconds"
    assert "log-log slope" in capsys.readouterr().out


def _seconds(V, m, T):
    rows, _ = bench_scaling([V], m, T, n_instances=2, repeats=3)
    return rows[0][1]


def _ratio(big, small, pairs=3):
    """Median of interleaved timing ratios; a single pair is at the mercy of scheduler noise."""
    return float(np.median([_seconds(*big) / _seconds(*small) for _ in range(pairs)]))


def test_runtime_grows_with_sensor_count():
    assert 2.5 <= _ratio((8, 20, 60), (4, 20, 60)) <= 6.0


def test_runtime_linear_in_iterations():
    assert 1.6 <= _ratio((4, 20, 120), (4, 20, 60)) <= 2.4


def test_runtime_linear_in_measurements():
    assert 1.4 <= _ratio((4, 40, 60), (4, 20, 60)) <= 2.6
