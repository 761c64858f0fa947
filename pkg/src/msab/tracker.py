"""LMB filter harness with an iterated-corrector multi-sensor update.

Each scan is processed as predict (survivors plus the birth density built
from the previous scan), then one single-sensor LMB update per sensor in
order, then pruning and state extraction.  Association weights in every
single-sensor update are the loopy-BP marginals, so no hypotheses are
enumerated.  Updated Gaussian components are collapsed back to one Gaussian
by moment matching; particle components are reweighted.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from msab.association import (
    AssociationTable,
    gaussian_innovation,
    marginal_association,
    track_association_ratios,
)
from msab.birth import BirthConfig, build_birth_lmb
from msab.core import (
    POSITION_IDX,
    BernoulliComponent,
    BirthLabel,
    GaussianDensity,
    LmbDensity,
    MotionModel,
    ParticleSet,
    SensorModel,
)
from msab.gaussian_backend import GaussianBackend, PrecomputeCache
from msab.gibbs import GibbsConfig, sample_birth_tuples
from msab.mc_backend import BirthPrior, MonteCarloBackend, systematic_resample

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrackerConfig:
    p_survival: float = 0.99
    prune_threshold: float = 1e-3
    max_components: int = 100
    extraction_threshold: float = 0.5

    def __post_init__(self):
        for name in ("p_survival", "prune_threshold", "extraction_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 < self.prune_threshold < 1.0 or not 0.0 < self.extraction_threshold < 1.0:
            raise ValueError("thresholds must lie in (0, 1)")
        if self.max_components < 1:
            raise ValueError("max_components must be >= 1")


def _clamp(r: float) -> float:
    return float(min(1.0, max(0.0, r)))


def predict(lmb: LmbDensity, motion: MotionModel, p_survival: float, birth: LmbDensity,
            rng: Optional[np.random.Generator] = None) -> LmbDensity:
    """Survivors pushed through the motion model, then the birth components appended as given."""
    clash = set(lmb.labels) & set(birth.labels)
    if clash:
        raise ValueError(f"birth labels already in use: {sorted(clash, key=repr)[:3]}")
    comps = []
    for c in lmb:
        if isinstance(c.spatial, GaussianDensity):
            spatial = motion.predict_gaussian(c.spatial)
        else:
            if rng is None:
                raise ValueError("particle prediction needs an rng")
            spatial = motion.predict_particles(c.spatial, rng)
        comps.append(BernoulliComponent(c.label, _clamp(c.existence * p_survival), spatial))
    return LmbDensity(tuple(comps)).union(birth)


def _moment_match(weights: np.ndarray, means: np.ndarray, covs: np.ndarray) -> GaussianDensity:
    w = weights / weights.sum()
    mu = w @ means
    d = means - mu
    P = np.einsum("i,ijk->jk", w, covs) + np.einsum("i,ij,ik->jk", w, d, d)
    return GaussianDensity(mu, 0.5 * (P + P.T))


def _update_gaussian(g: GaussianDensity, z_set: np.ndarray, sensor: SensorModel,
                     mix: np.ndarray) -> GaussianDensity:
    """Collapse the missed-detection and per-measurement Kalman posteriors weighted by ``mix``."""
    keep = np.flatnonzero(mix > 0)
    if keep.size == 1 and keep[0] == 0:
        return g
    zhat, S, K = gaussian_innovation(g, sensor)
    P_upd = g.cov - K @ S @ K.T
    P_upd = 0.5 * (P_upd + P_upd.T)
    means, covs = [], []
    for j in keep:
        if j == 0:
            means.append(g.mean)
            covs.append(g.cov)
        else:
            means.append(g.mean + K @ sensor.residual(z_set[j - 1], zhat))
            covs.append(P_upd)
    return _moment_match(mix[keep], np.array(means), np.array(covs))


def _update_particles(p: ParticleSet, z_set: np.ndarray, sensor: SensorModel, mix: np.ndarray,
                      logq: np.ndarray, rng: Optional[np.random.Generator]) -> ParticleSet:
    factor = np.full(len(p), mix[0])
    for j in np.flatnonzero(mix[1:] > 0) + 1:
        ll = sensor.log_likelihood(z_set[j - 1], p.states)
        factor += mix[j] * np.exp(ll - logq[j - 1])
    w = p.weights * factor
    if not w.sum() > 0:
        return p
    out = ParticleSet(p.states, w / w.sum())
    if rng is not None and out.ess() < 0.5 * len(out):
        idx = systematic_resample(out.weights, rng)
        out = ParticleSet.uniform(out.states[idx])
    return out


def update_sensor(lmb: LmbDensity, z_set: np.ndarray, sensor: SensorModel,
                  rng: Optional[np.random.Generator] = None):
    """Single-sensor LMB update with marginal association weights.

    Returns the updated density and the per-measurement association
    probabilities r_A (length m, clipped to [0, 1]).
    """
    z_set = np.atleast_2d(np.asarray(z_set, dtype=float)) if len(z_set) else np.zeros((0, sensor.meas_dim))
    m = len(z_set)
    if len(lmb) == 0:
        return lmb, np.zeros(m)
    pd = sensor.detection_prob
    r = lmb.existence
    missed, detect, logq = track_association_ratios(lmb, z_set, sensor)
    beta = marginal_association(missed, detect)
    comps = []
    for t, c in enumerate(lmb):
        # split the missed/non-existing event into its "exists but missed" share
        exists_missed = beta[t, 0] * r[t] * (1.0 - pd) / missed[t] if missed[t] > 0 else 0.0
        mix = np.concatenate([[exists_missed], beta[t, 1:]])
        r_new = _clamp(mix.sum())
        if r_new <= 0.0 or mix.sum() <= 0.0:
            comps.append(BernoulliComponent(c.label, r_new, c.spatial))
            continue
        if isinstance(c.spatial, GaussianDensity):
            spatial = _update_gaussian(c.spatial, z_set, sensor, mix)
        else:
            spatial = _update_particles(c.spatial, z_set, sensor, mix, logq[t], rng)
        comps.append(BernoulliComponent(c.label, r_new, spatial))
    r_a = np.clip(beta[:, 1:].sum(axis=0), 0.0, 1.0)
    return LmbDensity(tuple(comps)), r_a


def prune_and_cap(lmb: LmbDensity, cfg: TrackerConfig) -> LmbDensity:
    comps = [c for c in lmb if c.existence >= cfg.prune_threshold]
    comps.sort(key=lambda c: -c.existence)
    return LmbDensity(tuple(comps[:cfg.max_components]))


@dataclass(frozen=True)
class Estimate:
    label: object
    state: np.ndarray
    existence: float


def extract(lmb: LmbDensity, cfg: TrackerConfig) -> List[Estimate]:
    return [Estimate(c.label, np.asarray(c.spatial.mean), c.existence)
            for c in lmb if c.existence > cfg.extraction_threshold]


# -- birth models ----------------------------------------------------------------------

class UniformBirth:
    """Fixed grid of Gaussian birth components added on every scan."""

    def __init__(self, lo: float = -2000.0, hi: float = 12000.0, per_axis: int = 10,
                 sigma_pos: float = 250.0, sigma_vel: float = 50.0, existence: float = 0.1):
        grid = np.linspace(lo, hi, per_axis)
        self.means = [np.array([x, 0.0, y, 0.0]) for x in grid for y in grid]
        self.cov = np.diag([sigma_pos ** 2, sigma_vel ** 2, sigma_pos ** 2, sigma_vel ** 2])
        self.existence = existence
        self.last_untruncated = 0

    def birth_for(self, k: int) -> LmbDensity:
        return LmbDensity(tuple(
            BernoulliComponent(BirthLabel(k, (-(i + 1),)), self.existence, GaussianDensity(m, self.cov))
            for i, m in enumerate(self.means)))

    def observe(self, k: int, z_sets, r_a_vectors, rng) -> None:
        pass


class AdaptiveBirth:
    """Measurement-driven birth: Gibbs-sampled tuples from scan k seed components at k+1.

    ``prior`` is a GaussianDensity (closed-form backend, linear sensors) or a
    BirthPrior (Monte Carlo backend).
    """

    def __init__(self, sensors: Sequence[SensorModel], motion: MotionModel, prior,
                 gibbs: GibbsConfig = GibbsConfig(), birth: BirthConfig = BirthConfig(),
                 n_particles: int = 1000):
        self.sensors = list(sensors)
        self.motion = motion
        self.prior = prior
        self.gibbs = gibbs
        self.cfg = birth
        self.n_particles = n_particles
        self._pending = LmbDensity()
        self.last_untruncated = 0
        if isinstance(prior, GaussianDensity):
            self._cache = PrecomputeCache.build(prior, self.sensors)
        elif isinstance(prior, BirthPrior):
            self._cache = None
        else:
            raise TypeError("prior must be a GaussianDensity or a BirthPrior")

    def _backend(self, z_sets, rng):
        if self._cache is not None:
            return GaussianBackend(self._cache, self.sensors, z_sets, self.motion)
        return MonteCarloBackend(self.sensors, z_sets, self.prior, self.n_particles, self.motion, rng)

    def birth_for(self, k: int) -> LmbDensity:
        out, self._pending = self._pending, LmbDensity()
        return out

    def observe(self, k: int, z_sets, r_a_vectors, rng: np.random.Generator) -> None:
        """Build the birth density for scan k+1 from scan k's measurements."""
        backend = self._backend(z_sets, rng)
        table = AssociationTable.from_vectors(r_a_vectors)
        self.last_untruncated = math.prod(m + 1 for m in backend.sizes)
        result = sample_birth_tuples(backend, table, self.gibbs, rng)
        self._pending = build_birth_lmb(result.tuples, table, backend, self.cfg, k + 1)


# -- filter ------------------------------------------------------------------------------

@dataclass
class StepRecord:
    estimates: List[Estimate]
    n_birth: int
    n_untruncated: int
    n_components: int


@dataclass
class LmbTracker:
    sensors: Sequence[SensorModel]
    motion: MotionModel
    birth_model: object
    cfg: TrackerConfig = TrackerConfig()
    rng: np.random.Generator = field(default_factory=np.random.default_rng)
    density: LmbDensity = field(default_factory=LmbDensity)
    history: List[StepRecord] = field(default_factory=list)

    def step(self, k: int, z_sets) -> StepRecord:
        birth = self.birth_model.birth_for(k)
        untruncated = self.birth_model.last_untruncated
        lmb = predict(self.density, self.motion, self.cfg.p_survival, birth, self.rng)
        r_a = []
        for sensor, z in zip(self.sensors, z_sets):
            lmb, ra = update_sensor(lmb, z, sensor, self.rng)
            r_a.append(ra)
        self.density = prune_and_cap(lmb, self.cfg)
        self.birth_model.observe(k, z_sets, r_a, self.rng)
        rec = StepRecord(extract(self.density, self.cfg), len(birth), untruncated, len(self.density))
        self.history.append(rec)
        return rec

    def run(self, scans) -> List[StepRecord]:
        for k, z_sets in enumerate(scans):
            self.step(k, z_sets)
        return self.history


def position_of(state: np.ndarray) -> np.ndarray:
    return np.asarray(state)[list(POSITION_IDX)]
