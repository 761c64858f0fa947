"""Command-line entry point: ``msab simulate | oracle | bench``.

Exit codes: 0 ok, 1 a check failed, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import concurrent.futures as cf
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import yaml

from msab import __version__
from msab.association import AssociationTable
from msab.birth import BirthConfig
from msab.core import GaussianDensity, LinearGaussianSensor
from msab.gaussian_backend import GaussianBackend
from msab.gibbs import GibbsConfig, sample_birth_tuples
from msab.mc_backend import BirthPrior, UniformBox
from msab.metrics import OspaConfig, cardinality_error, estimate_tracks, ospa2, write_metrics_csv
from msab.sim import (
    ConfigError,
    ScenarioConfig,
    build_sensors,
    generate_scans,
    generate_truth,
    load_config,
)
from msab.tracker import AdaptiveBirth, LmbTracker, TrackerConfig, UniformBirth

log = logging.getLogger("msab")

BIRTH_KINDS = ("adaptive-gaussian", "adaptive-mc", "uniform")
TRIAL_FIELDS = ("trial", "step", "n_true", "n_estimated", "cardinality_error", "lagged_cardinality_error", "ospa2",
                "n_birth", "n_untruncated")
AVERAGE_FIELDS = ("step", "mean_cardinality_error", "mean_abs_cardinality_error",
                  "mean_abs_lagged_cardinality_error", "mean_ospa2",
                  "mean_n_birth", "mean_n_untruncated")


# -- experiment glue ---------------------------------------------------------------------

def make_birth_model(cfg: dict, kind: str, sensors, motion):
    b, box = cfg["birth"], cfg["scenario"]["box"]
    if kind == "uniform":
        return UniformBirth(b["uniform_lo"], b["uniform_hi"], b["uniform_per_axis"],
                            b["uniform_sigma_pos"], b["uniform_sigma_vel"], b["uniform_existence"])
    gibbs = GibbsConfig(iterations=b["gibbs_iterations"], restart_period=b["restart_period"],
                        tau=b["tau"], min_detections=b["min_detections"])
    birth = BirthConfig(b["r_b_max"], b["lambda_b"], b["min_detections"])
    if kind == "adaptive-gaussian":
        if not all(isinstance(s, LinearGaussianSensor) for s in sensors):
            raise ConfigError("scenario.kind", "adaptive-gaussian birth needs linear position sensors")
        sp, sv = b["prior_sigma_pos"], b["prior_sigma_vel"]
        prior = GaussianDensity(np.zeros(4), np.diag([sp ** 2, sv ** 2, sp ** 2, sv ** 2]))
        return AdaptiveBirth(sensors, motion, prior, gibbs, birth)
    if kind == "adaptive-mc":
        prior = BirthPrior(UniformBox(np.full(2, box[0]), np.full(2, box[1])),
                           GaussianDensity(np.zeros(2), np.eye(2) * b["prior_sigma_vel"] ** 2))
        return AdaptiveBirth(sensors, motion, prior, gibbs, birth, n_particles=b["n_particles"])
    raise ConfigError("--birth", f"unknown birth model {kind!r}")


@dataclass
class TrialResult:
    rows: List[dict]
    seconds: float


def trial_streams(seed: int, trial: int):
    """(truth/measurement rng, filter rng); the first depends only on (seed, trial)."""
    ss = np.random.SeedSequence([seed, trial])
    world, filt = ss.spawn(2)
    return np.random.default_rng(world), np.random.default_rng(filt)


def run_trial(cfg: dict, birth_kind: str, seed: int, trial: int) -> TrialResult:
    t0 = time.perf_counter()
    world_rng, filter_rng = trial_streams(seed, trial)
    scenario = ScenarioConfig.from_config(cfg, seed)
    truth = generate_truth(scenario, world_rng)
    sensors = build_sensors(cfg)
    scans = generate_scans(truth, sensors, world_rng)
    motion = scenario.motion
    tracker = LmbTracker(sensors, motion, make_birth_model(cfg, birth_kind, sensors, motion),
                         TrackerConfig(**cfg["tracker"]), rng=filter_rng)
    history = tracker.run(scans)
    ocfg = OspaConfig(**cfg["metrics"])
    o2 = ospa2(estimate_tracks(history), truth.tracks(), len(history), ocfg)
    lagged = truth.cardinality_lagged(1)
    rows = []
    for k, rec in enumerate(history):
        n_true = len(truth.steps[k])
        rows.append({"trial": trial, "step": k, "n_true": n_true, "n_estimated": len(rec.estimates),
                     "cardinality_error": cardinality_error(len(rec.estimates), n_true),
                     "lagged_cardinality_error": cardinality_error(len(rec.estimates), int(lagged[k])),
                     "ospa2": float(o2[k]), "n_birth": rec.n_birth, "n_untruncated": rec.n_untruncated})
    return TrialResult(rows, time.perf_counter() - t0)


def worker_count(n_jobs: int) -> int:
    env = os.environ.get("MSAB_THREADS")
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise ConfigError("MSAB_THREADS", f"expected a positive integer, got {env!r}")
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_jobs))


def run_trials(cfg: dict, birth_kind: str, n_trials: int, seed: int) -> List[TrialResult]:
    """Trials fan out over threads; results come back in trial order."""
    make_birth_model(cfg, birth_kind, build_sensors(cfg), ScenarioConfig.from_config(cfg).motion)
    workers = worker_count(n_trials)
    if workers == 1:
        return [run_trial(cfg, birth_kind, seed, t) for t in range(n_trials)]
    with cf.ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda t: run_trial(cfg, birth_kind, seed, t), range(n_trials)))


def average_rows(results: Sequence[TrialResult]) -> List[dict]:
    n_steps = len(results[0].rows)
    out = []
    for k in range(n_steps):
        col = [r.rows[k] for r in results]
        ce = np.array([row["cardinality_error"] for row in col], dtype=float)
        lce = np.array([row["lagged_cardinality_error"] for row in col], dtype=float)
        out.append({"step": k,
                    "mean_cardinality_error": float(ce.mean()),
                    "mean_abs_cardinality_error": float(np.abs(ce).mean()),
                    "mean_abs_lagged_cardinality_error": float(np.abs(lce).mean()),
                    "mean_ospa2": float(np.mean([row["ospa2"] for row in col])),
                    "mean_n_birth": float(np.mean([row["n_birth"] for row in col])),
                    "mean_n_untruncated": float(np.mean([row["n_untruncated"] for row in col]))})
    return out


# -- bench ---------------------------------------------------------------------------------

def bench_instance(V: int, m: int, seed: int) -> GaussianBackend:
    """V position sensors over a 10 km box; m//2 targets seen by every sensor, the rest clutter."""
    rng = np.random.default_rng(seed)
    window = (np.zeros(2), np.full(2, 1e4))
    sensors = [LinearGaussianSensor.position(10.0, 0.95, 5.0, window) for _ in range(V)]
    prior = GaussianDensity(np.zeros(4), np.diag([1e5 ** 2, 50.0 ** 2, 1e5 ** 2, 50.0 ** 2]))
    targets = rng.uniform(0.0, 1e4, size=(m // 2, 4))
    z_sets = []
    for s in sensors:
        z = [s.sample_measurement(x, rng) for x in targets]
        z.extend(s.sample_clutter(rng, m - len(z)))
        z_sets.append(np.array(z).reshape(m, 2))
    return GaussianBackend.from_prior(prior, sensors, z_sets)


def bench_scaling(sensor_counts: Sequence[int], m: int, iterations: int, n_instances: int = 3,
                  repeats: int = 2):
    """Wall time of the Gibbs sampler per V (sum over instances of best-of-``repeats``) and the log-log slope."""
    rows = []
    for V in sensor_counts:
        total = 0.0
        for inst in range(n_instances):
            backend = bench_instance(V, m, inst)
            table = AssociationTable.zeros(backend.sizes)
            best = float("inf")
            for r in range(repeats):
                t0 = time.perf_counter()
                sample_birth_tuples(backend, table, GibbsConfig(iterations=iterations, rng_seed=r))
                best = min(best, time.perf_counter() - t0)
            total += best
        rows.append((V, total))
    V_, t_ = np.array(rows).T
    slope = float(np.polyfit(np.log(V_), np.log(t_), 1)[0]) if len(rows) > 1 else float("nan")
    return rows, slope


# -- commands ------------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.trials < 1:
        raise ConfigError("--trials", "must be >= 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    results = run_trials(cfg, args.birth, args.trials, args.seed)
    write_metrics_csv(out / "trials.csv", [row for r in results for row in r.rows], TRIAL_FIELDS)
    avg = average_rows(results)
    write_metrics_csv(out / "average.csv", avg, AVERAGE_FIELDS)
    manifest = {"msab_version": __version__, "command": "simulate", "birth": args.birth,
                "trials": args.trials, "seed": args.seed, "config": cfg}
    (out / "manifest.yaml").write_text(yaml.safe_dump(manifest, sort_keys=True))
    mean_o2 = np.mean([row["mean_ospa2"] for row in avg])
    mean_ce = np.mean([row["mean_abs_cardinality_error"] for row in avg])
    print(f"{args.trials} trial(s), birth={args.birth}: mean OSPA(2) {mean_o2:.2f}, "
          f"mean |cardinality error| {mean_ce:.3f}, {time.perf_counter() - t0:.1f} s -> {out}")
    return 0


def cmd_oracle(args) -> int:
    from msab import oracle

    suites = {"tv": oracle.run_tv_suite, "bound": oracle.run_bound_suite,
              "backend-xcheck": oracle.run_backend_xcheck}
    res = suites[args.case](seed=args.seed)
    print(f"{res.name}: {'PASS' if res.passed else 'FAIL'} - {res.detail}")
    return 0 if res.passed else 1


def cmd_bench(args) -> int:
    rows, slope = bench_scaling(args.sensors, args.measurements, args.gibbs_iters,
                                args.instances, args.repeats)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("n_sensors,seconds\n")
            for V, t in rows:
                fh.write(f"{V},{t:.6f}\n")
    for V, t in rows:
        print(f"V={V:2d}  {t:.4f} s")
    print(f"log-log slope {slope:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="msab", description="Multi-sensor adaptive birth toolkit")
    p.add_argument("--version", action="version", version=f"msab {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run tracking trials from a YAML config")
    s.add_argument("config")
    s.add_argument("--birth", choices=BIRTH_KINDS, default="adaptive-gaussian")
    s.add_argument("--trials", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="msab_out")
    s.set_defaults(func=cmd_simulate)

    o = sub.add_parser("oracle", help="brute-force reference checks")
    o.add_argument("--case", choices=("tv", "bound", "backend-xcheck"), required=True)
    o.add_argument("--seed", type=int, default=0)
    o.set_defaults(func=cmd_oracle)

    b = sub.add_parser("bench", help="time the Gibbs sampler against the number of sensors")
    b.add_argument("--sensors", type=int, nargs="+", default=[2, 3, 4, 6, 8])
    b.add_argument("--measurements", type=int, default=20)
    b.add_argument("--gibbs-iters", type=int, default=100)
    b.add_argument("--instances", type=int, default=3)
    b.add_argument("--repeats", type=int, default=2)
    b.add_argument("--csv", default=None, help="write (V, seconds) rows here")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"msab: configuration error in {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
