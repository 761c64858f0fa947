"""Scenario generation: ground truth, sensor layouts and measurement scans.

Two scenario kinds are supported:

``bearing``
    Bearing-range sensors on a circle around the surveillance box; every
    ``birth_period`` steps a uniform draw from 0..max_births decides how many
    targets appear, at uniform positions with fixed speed and uniform heading.
``position``
    XY-position sensors; a fixed schedule of birth locations and times with
    a peak of 22 simultaneous targets.

Configs are YAML files with a ``schema_version`` key; see ``DEFAULT_CONFIG``
for every recognised key.
"""
from __future__ import annotations

import copy
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import yaml

from msab.core import BearingRangeSensor, LinearGaussianSensor, MotionModel, SensorModel

SCHEMA_VERSION = 1

DEFAULT_CONFIG = {
    "schema_version": SCHEMA_VERSION,
    "scenario": {
        "kind": "position",          # position | bearing
        "n_sensors": 3,
        "duration_steps": 40,
        "dt": 1.0,
        "clutter_rate": 5.0,
        "detection_prob": 0.95,
        "box": [0.0, 10000.0],
        "process_noise": [5.0, 5.0],
        "birth_period": 5,           # bearing kind only
        "max_births": 3,             # bearing kind only
        "speed": 50.0,               # bearing kind only
        "exit_margin": 2000.0,       # targets farther than this outside the box are removed
    },
    "sensors": {
        "position_sigma": 10.0,
        "bearing_sigma_deg": 0.25,
        "range_sigma": 10.0,
        "circle_radius": None,       # default: half-diagonal of the box
        "max_range": None,           # default: 2 * circle_radius
    },
    "tracker": {
        "p_survival": 0.99,
        "prune_threshold": 1e-3,
        "max_components": 100,
        "extraction_threshold": 0.5,
    },
    "birth": {
        "gibbs_iterations": 1000,
        "restart_period": 100,
        "tau": 0.01,
        "lambda_b": 0.5,
        "r_b_max": 1.0,
        "min_detections": 2,
        "n_particles": 1000,
        "prior_sigma_pos": 100000.0,
        "prior_sigma_vel": 50.0,
        "uniform_per_axis": 10,
        "uniform_lo": -2000.0,
        "uniform_hi": 12000.0,
        "uniform_sigma_pos": 250.0,
        "uniform_sigma_vel": 50.0,
        "uniform_existence": 0.1,
    },
    "metrics": {
        "cutoff": 200.0,
        "order": 1.0,
        "window": 5,
        "window_power": 0.0,
    },
}


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _merge(defaults: dict, given: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        path = f"{prefix}{key}"
        if key not in defaults:
            raise ConfigError(path, "unknown key")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(path, "expected a mapping")
            out[key] = _merge(defaults[key], value, path + ".")
        else:
            out[key] = value
    return out


def _number(cfg: dict, section: str, key: str, lo: Optional[float] = None, hi: Optional[float] = None,
            integer: bool = False, allow_none: bool = False):
    value = cfg[section][key]
    path = f"{section}.{key}"
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if (lo is not None and value < lo) or (hi is not None and value > hi):
        raise ConfigError(path, f"value {value!r} outside [{lo}, {hi}]")
    return int(value) if integer else float(value)


def validate_config(raw: dict) -> dict:
    """Merge ``raw`` over the defaults and check every value; returns the resolved dict."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a mapping")
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version!r}")
    cfg = _merge(DEFAULT_CONFIG, raw)
    sc = cfg["scenario"]
    if sc["kind"] not in ("position", "bearing"):
        raise ConfigError("scenario.kind", f"expected 'position' or 'bearing', got {sc['kind']!r}")
    _number(cfg, "scenario", "n_sensors", 1, None, integer=True)
    _number(cfg, "scenario", "duration_steps", 1, None, integer=True)
    _number(cfg, "scenario", "dt", 1e-9)
    _number(cfg, "scenario", "clutter_rate", 0.0)
    _number(cfg, "scenario", "detection_prob", 0.0, 0.999999)
    _number(cfg, "scenario", "birth_period", 1, None, integer=True)
    _number(cfg, "scenario", "max_births", 0, None, integer=True)
    _number(cfg, "scenario", "speed", 0.0)
    _number(cfg, "scenario", "exit_margin", 0.0)
    box = sc["box"]
    if not (isinstance(box, list) and len(box) == 2 and all(isinstance(b, (int, float)) for b in box)
            and box[1] > box[0]):
        raise ConfigError("scenario.box", "expected [lo, hi] with hi > lo")
    pn = sc["process_noise"]
    if not (isinstance(pn, list) and len(pn) == 2 and all(isinstance(v, (int, float)) and v >= 0 for v in pn)):
        raise ConfigError("scenario.process_noise", "expected two non-negative numbers")
    _number(cfg, "sensors", "position_sigma", 1e-12)
    _number(cfg, "sensors", "bearing_sigma_deg", 1e-12)
    _number(cfg, "sensors", "range_sigma", 1e-12)
    _number(cfg, "sensors", "circle_radius", 0.0, allow_none=True)
    _number(cfg, "sensors", "max_range", 1e-9, allow_none=True)
    _number(cfg, "tracker", "p_survival", 0.0, 1.0)
    _number(cfg, "tracker", "prune_threshold", 1e-300, 0.999999)
    _number(cfg, "tracker", "max_components", 1, None, integer=True)
    _number(cfg, "tracker", "extraction_threshold", 1e-300, 0.999999)
    _number(cfg, "birth", "gibbs_iterations", 1, None, integer=True)
    if cfg["birth"]["restart_period"] is not None:
        _number(cfg, "birth", "restart_period", 1, None, integer=True)
    _number(cfg, "birth", "tau", 0.0, 1.0)
    _number(cfg, "birth", "lambda_b", 0.0)
    _number(cfg, "birth", "r_b_max", 0.0, 1.0)
    _number(cfg, "birth", "min_detections", 0, None, integer=True)
    _number(cfg, "birth", "n_particles", 1, None, integer=True)
    for key in ("prior_sigma_pos", "prior_sigma_vel", "uniform_sigma_pos", "uniform_sigma_vel"):
        _number(cfg, "birth", key, 1e-12)
    _number(cfg, "birth", "uniform_per_axis", 1, None, integer=True)
    _number(cfg, "birth", "uniform_lo")
    _number(cfg, "birth", "uniform_hi")
    _number(cfg, "birth", "uniform_existence", 0.0, 1.0)
    _number(cfg, "metrics", "cutoff", 1e-12)
    _number(cfg, "metrics", "order", 1.0)
    _number(cfg, "metrics", "window", 1, None, integer=True)
    _number(cfg, "metrics", "window_power", 0.0)
    return cfg


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("<file>", str(exc)) from exc
    try:
        raw = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError("<syntax>", str(exc)) from exc
    return validate_config(raw)


def desk_config(kind: str = "position", **scenario) -> dict:
    raw = {"scenario": {"kind": kind, **scenario}}
    if kind == "bearing":
        raw["birth"] = {"gibbs_iterations": 100, "restart_period": 5, "prior_sigma_vel": 20.0,
                        "uniform_sigma_pos": 300.0, "uniform_sigma_vel": 20.0}
    return validate_config(raw)


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str = "position"
    n_sensors: int = 3
    duration_steps: int = 40
    dt: float = 1.0
    clutter_rate: float = 5.0
    detection_prob: float = 0.95
    box: tuple = (0.0, 10000.0)
    process_noise: tuple = (5.0, 5.0)
    birth_period: int = 5
    max_births: int = 3
    speed: float = 50.0
    exit_margin: float = 2000.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.clutter_rate < 0 or not 0 <= self.detection_prob < 1 or min(self.process_noise) < 0:
            raise ValueError("rates and noise levels must be non-negative, detection_prob < 1")

    @classmethod
    def from_config(cls, cfg: dict, seed: int = 0) -> "ScenarioConfig":
        sc = dict(cfg["scenario"])
        sc["box"] = tuple(sc["box"])
        sc["process_noise"] = tuple(sc["process_noise"])
        return cls(rng_seed=seed, **sc)

    @property
    def motion(self) -> MotionModel:
        return MotionModel.constant_velocity(self.dt, self.process_noise)


@dataclass
class TruthLog:
    """Per-step ``{label: state}`` maps plus birth and death steps per label."""

    steps: List[Dict[int, np.ndarray]]
    birth_step: Dict[int, int] = field(default_factory=dict)
    death_step: Dict[int, int] = field(default_factory=dict)

    def cardinality(self) -> np.ndarray:
        return np.array([len(s) for s in self.steps])

    def cardinality_lagged(self, lag: int = 1) -> np.ndarray:
        """Targets alive at each step that were born at least ``lag`` steps earlier."""
        return np.array([sum(1 for lab in step if k - self.birth_step[lab] >= lag)
                         for k, step in enumerate(self.steps)])

    def positions(self, k: int) -> np.ndarray:
        return np.array([x[[0, 2]] for x in self.steps[k].values()]).reshape(-1, 2)

    def tracks(self) -> Dict[int, Dict[int, np.ndarray]]:
        """label -> {step: position}."""
        out: Dict[int, Dict[int, np.ndarray]] = {}
        for k, step in enumerate(self.steps):
            for lab, x in step.items():
                out.setdefault(lab, {})[k] = x[[0, 2]]
        return out


def fixed_schedule(duration: int, box=(0.0, 10000.0), min_separation: float = 500.0):
    """Birth plan for the position scenario: list of (birth_step, death_step, initial state).

    26 targets from 26 distinct sites drawn once from a fixed generator
    (independent of the trial seed), at least ``min_separation`` apart.
    22 are born over the first 40% of the run, the first four die at 70% and
    four more appear at 75%, so at most 22 are alive at once.
    """
    lo, hi = box
    span = hi - lo
    rng = np.random.default_rng(20230517)
    sites: List[np.ndarray] = []
    while len(sites) < 26:
        p = rng.uniform(lo + 0.1 * span, hi - 0.1 * span, size=2)
        if all(np.linalg.norm(p - q) >= min_separation for q in sites):
            sites.append(p)
    plan = []
    for i, pos in enumerate(sites):
        heading = rng.uniform(-math.pi, math.pi)
        speed = rng.uniform(10.0, 30.0)
        state = np.array([pos[0], speed * math.cos(heading), pos[1], speed * math.sin(heading)])
        if i < 22:
            birth = int(round(i * 0.4 * duration / 22))
            death = int(round(0.7 * duration)) if i < 4 else duration
        else:
            birth = int(round(0.75 * duration))
            death = duration
        plan.append((birth, death, state))
    return plan


def generate_truth(cfg: ScenarioConfig, rng: Optional[np.random.Generator] = None) -> TruthLog:
    rng = rng if rng is not None else np.random.default_rng(cfg.rng_seed)
    motion = cfg.motion
    lo, hi = cfg.box
    alive: Dict[int, np.ndarray] = {}
    log = TruthLog(steps=[])
    next_label = 0
    plan = fixed_schedule(cfg.duration_steps, cfg.box) if cfg.kind == "position" else None
    for k in range(cfg.duration_steps):
        if k > 0 and alive:
            labels = list(alive)
            states = motion.propagate(np.array([alive[lab] for lab in labels]), rng)
            alive = dict(zip(labels, states))
        # deaths
        for lab in list(alive):
            x = alive[lab]
            outside = min(x[0], x[2]) < lo - cfg.exit_margin or max(x[0], x[2]) > hi + cfg.exit_margin
            scheduled = plan is not None and plan[lab][1] <= k
            if outside or scheduled:
                del alive[lab]
                log.death_step[lab] = k
        # births
        if plan is not None:
            for idx, (b, d, x0) in enumerate(plan):
                if b == k and d > k:
                    alive[idx] = x0.copy()
                    log.birth_step[idx] = k
        elif k % cfg.birth_period == 0:
            for _ in range(int(rng.integers(0, cfg.max_births + 1))):
                pos = rng.uniform(lo, hi, size=2)
                heading = rng.uniform(-math.pi, math.pi)
                vel = cfg.speed * np.array([math.cos(heading), math.sin(heading)])
                alive[next_label] = np.array([pos[0], vel[0], pos[1], vel[1]])
                log.birth_step[next_label] = k
                next_label += 1
        log.steps.append({lab: x.copy() for lab, x in alive.items()})
    return log


def build_sensors(cfg: dict) -> List[SensorModel]:
    sc, se = cfg["scenario"], cfg["sensors"]
    lo, hi = sc["box"]
    V = sc["n_sensors"]
    pd, rate = sc["detection_prob"], sc["clutter_rate"]
    if sc["kind"] == "position":
        window = (np.array([lo, lo], dtype=float), np.array([hi, hi], dtype=float))
        return [LinearGaussianSensor.position(se["position_sigma"], pd, rate, window) for _ in range(V)]
    radius = se["circle_radius"] if se["circle_radius"] is not None else (hi - lo) / math.sqrt(2.0)
    max_range = se["max_range"] if se["max_range"] is not None else 2.0 * radius
    centre = np.array([(lo + hi) / 2.0] * 2)
    R = np.diag([math.radians(se["bearing_sigma_deg"]) ** 2, se["range_sigma"] ** 2])
    sensors = []
    for i in range(V):
        a = 2.0 * math.pi * i / V
        pos = centre + radius * np.array([math.cos(a), math.sin(a)])
        sensors.append(BearingRangeSensor(pos, R, pd, rate, max_range))
    return sensors


def in_view(sensor: SensorModel, x: np.ndarray) -> bool:
    if isinstance(sensor, BearingRangeSensor):
        return float(np.hypot(x[0] - sensor.position[0], x[2] - sensor.position[1])) <= sensor.max_range
    lo, hi = sensor.window
    z = sensor.h(x)[0]
    return bool(np.all(z >= lo) and np.all(z <= hi))


def generate_measurements(states, sensors: List[SensorModel], rng: np.random.Generator) -> List[np.ndarray]:
    """One scan per sensor: independent detections, Poisson clutter, shuffled order."""
    scans = []
    for sensor in sensors:
        zs = [sensor.sample_measurement(x, rng) for x in states
              if in_view(sensor, x) and rng.random() < sensor.detection_prob]
        n_c = int(rng.poisson(sensor.clutter_rate))
        if n_c:
            zs.extend(sensor.sample_clutter(rng, n_c))
        z = np.array(zs, dtype=float).reshape(-1, sensor.meas_dim)
        scans.append(z[rng.permutation(len(z))])
    return scans


def generate_scans(truth: TruthLog, sensors, rng: np.random.Generator) -> List[List[np.ndarray]]:
    return [generate_measurements(list(step.values()), sensors, rng) for step in truth.steps]


def write_truth_csv(path, truth: TruthLog) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "label", "px", "vx", "py", "vy"])
        for k, step in enumerate(truth.steps):
            for lab in sorted(step):
                w.writerow([k, lab, *(f"{v:.6f}" for v in step[lab])])


def write_measurements_csv(path, scans) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "sensor", "z0", "z1"])
        for k, scan in enumerate(scans):
            for s, z in enumerate(scan):
                for row in z:
                    w.writerow([k, s, *(f"{v:.6f}" for v in row)])
