"""Importance-sampling approximations of tuple evidence and birth densities.

Works with any sensor that can invert its measurement function on the
observable (position) coordinates, including bearing-range sensors, and with
partially uniform birth priors.  The proposal draws positions around the
inverted measurement of one detected "anchor" sensor and draws the remaining
(unobservable) coordinates from the prior, so the prior's unobservable part
cancels in the importance weights.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from msab.association import AssociationTable
from msab.core import (
    LOG_2PI,
    POSITION_IDX,
    GaussianDensity,
    MotionModel,
    ParticleSet,
    SensorModel,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class UniformBox:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ValueError("box needs hi > lo in every dimension")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        inside = np.all((x >= self.lo) & (x <= self.hi), axis=1)
        return np.where(inside, -math.log(self.volume), -np.inf)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(n, self.dim))


@dataclass(frozen=True)
class BirthPrior:
    """Independent priors over observable and unobservable state coordinates."""

    observable: Union[UniformBox, GaussianDensity]
    unobservable: GaussianDensity
    observable_dims: tuple = POSITION_IDX
    state_dim: int = 4

    def __post_init__(self):
        obs = tuple(self.observable_dims)
        if len(set(obs)) != len(obs) or not all(0 <= i < self.state_dim for i in obs):
            raise ValueError("invalid observable dims")
        if self.observable.dim != len(obs) or self.unobservable.dim != self.state_dim - len(obs):
            raise ValueError("prior dimensions do not partition the state")
        object.__setattr__(self, "observable_dims", obs)

    @property
    def unobservable_dims(self) -> tuple:
        return tuple(i for i in range(self.state_dim) if i not in self.observable_dims)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        x = np.empty((n, self.state_dim))
        x[:, list(self.observable_dims)] = self.observable.sample(rng, n)
        x[:, list(self.unobservable_dims)] = self.unobservable.sample(rng, n)
        return x


@dataclass
class ProposalDraw:
    """Importance samples for one tuple.  ``log_weights`` are unnormalized."""

    anchor_sensor: int
    states: np.ndarray
    log_weights: np.ndarray

    @property
    def samples(self) -> ParticleSet:
        lw = self.log_weights
        top = lw.max()
        w = np.exp(lw - top) if np.isfinite(top) else np.zeros_like(lw)
        return ParticleSet(self.states, w)


def systematic_resample(weights: np.ndarray, rng: np.random.Generator, n: Optional[int] = None) -> np.ndarray:
    """Indices drawn by systematic resampling (one uniform offset, evenly spaced pointers)."""
    w = np.asarray(weights, dtype=float)
    n = w.size if n is None else n
    cdf = np.cumsum(w / w.sum())
    cdf[-1] = 1.0
    u = (rng.random() + np.arange(n)) / n
    return np.searchsorted(cdf, u, side="right").clip(max=w.size - 1)


def _proposal_params(sensor: SensorModel, z: np.ndarray):
    mean, jac = sensor.inverse(z)
    cov = jac @ sensor.R @ jac.T
    cov = 0.5 * (cov + cov.T)
    return mean, np.linalg.cholesky(cov)


def _gauss_logpdf_chol(x: np.ndarray, mean: np.ndarray, L: np.ndarray) -> np.ndarray:
    u = np.linalg.solve(L, (x - mean).T)
    return -0.5 * ((u * u).sum(axis=0) + 2.0 * np.log(np.diag(L)).sum() + mean.size * LOG_2PI)


def _log_mean(lw: np.ndarray) -> float:
    return float(logsumexp(lw) - math.log(lw.size))


class MonteCarloBackend:
    """Monte Carlo conditional-distribution backend bound to one scan of measurements."""

    def __init__(self, sensors: Sequence[SensorModel], z_sets, prior: BirthPrior,
                 n_particles: int = 1000, motion: Optional[MotionModel] = None,
                 rng: Optional[np.random.Generator] = None):
        if len(sensors) != len(z_sets):
            raise ValueError("one measurement set per sensor required")
        if n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        self.sensors = list(sensors)
        self.z_sets = [np.atleast_2d(np.asarray(z, dtype=float)) if len(z) else np.zeros((0, s.meas_dim))
                       for s, z in zip(sensors, z_sets)]
        self.prior = prior
        self.n_particles = int(n_particles)
        self.motion = motion
        self.rng = rng if rng is not None else np.random.default_rng()
        self.sizes = tuple(len(z) for z in self.z_sets)
        self.log_kappa = [np.log(s.kappa(z)) if len(z) else np.zeros(0)
                          for s, z in zip(self.sensors, self.z_sets)]
        self.n_degenerate = 0

    # -- pseudolikelihood pieces -------------------------------------------------

    def log_psi_sensor(self, s: int, j: int, states: np.ndarray) -> np.ndarray:
        sensor = self.sensors[s]
        if j == 0:
            return np.full(states.shape[0], math.log1p(-sensor.detection_prob))
        return (math.log(sensor.detection_prob) + sensor.log_likelihood(self.z_sets[s][j - 1], states)
                - self.log_kappa[s][j - 1])

    def log_psi(self, J: Sequence[int], states: np.ndarray, skip: Optional[int] = None) -> np.ndarray:
        out = np.zeros(states.shape[0])
        for s, j in enumerate(J):
            if s != skip:
                out += self.log_psi_sensor(s, j, states)
        return out

    def _log_missed_all(self) -> float:
        return sum(math.log1p(-s.detection_prob) for s in self.sensors)

    # -- proposal ---------------------------------------------------------------

    def _sample_states(self, anchor: int, z: np.ndarray, eps: np.ndarray, unobs: np.ndarray):
        mean, L = _proposal_params(self.sensors[anchor], z)
        xo = mean + eps @ L.T
        states = np.empty((eps.shape[0], self.prior.state_dim))
        states[:, list(self.prior.observable_dims)] = xo
        states[:, list(self.prior.unobservable_dims)] = unobs
        log_ratio = self.prior.observable.logpdf(xo) - _gauss_logpdf_chol(xo, mean, L)
        return states, log_ratio

    def _base_draws(self, n: int):
        n_o = len(self.prior.observable_dims)
        return self.rng.standard_normal((n, n_o)), self.prior.unobservable.sample(self.rng, n)

    def draw_proposal(self, J: Sequence[int], anchor: Optional[int] = None,
                      n_particles: Optional[int] = None) -> ProposalDraw:
        detected = [s for s, j in enumerate(J) if j > 0]
        if not detected:
            raise ValueError("proposal needs at least one detected sensor in the tuple")
        if anchor is None:
            anchor = detected[self.rng.integers(len(detected))]
        elif J[anchor] == 0:
            raise ValueError("anchor sensor must have a detection in the tuple")
        n = n_particles or self.n_particles
        eps, unobs = self._base_draws(n)
        states, log_ratio = self._sample_states(anchor, self.z_sets[anchor][J[anchor] - 1], eps, unobs)
        return ProposalDraw(anchor, states, self.log_psi(J, states) + log_ratio)

    # -- backend contract -------------------------------------------------------

    def log_psi_bar(self, J: Sequence[int]) -> float:
        if not any(j > 0 for j in J):
            return self._log_missed_all()
        return log_psi_bar_mc(self.draw_proposal(J))

    def log_conditional_weights(self, s: int, J: Sequence[int], table: AssociationTable,
                                active: Optional[np.ndarray] = None) -> np.ndarray:
        m = self.sizes[s]
        out = np.full(m + 1, -np.inf)
        r_a = table.per_sensor[s]
        cands = [j for j in range(m + 1) if (active is None or active[j]) and (j == 0 or r_a[j] < 1.0)]
        others = [t for t, j in enumerate(J) if j > 0 and t != s]
        eps, unobs = self._base_draws(self.n_particles)
        sensor = self.sensors[s]
        if others:
            # one shared anchor so all candidates see the same particles
            anchor = others[self.rng.integers(len(others))]
            states, log_ratio = self._sample_states(anchor, self.z_sets[anchor][J[anchor] - 1], eps, unobs)
            base = self.log_psi(J, states, skip=s) + log_ratio
            for j in cands:
                out[j] = _log_mean(base + self.log_psi_sensor(s, j, states))
        else:
            for j in cands:
                if j == 0:
                    out[0] = self._log_missed_all()
                    continue
                states, log_ratio = self._sample_states(s, self.z_sets[s][j - 1], eps, unobs)
                Jj = tuple(J[:s]) + (j,) + tuple(J[s + 1:])
                out[j] = _log_mean(self.log_psi(Jj, states) + log_ratio)
        for j in cands:
            if j > 0:
                out[j] += math.log1p(-r_a[j])
        return out

    def conditional_weights(self, s: int, J: Sequence[int], table: AssociationTable,
                            active: Optional[np.ndarray] = None) -> np.ndarray:
        lw = self.log_conditional_weights(s, J, table, active)
        top = lw.max()
        if not np.isfinite(top):
            return np.zeros_like(lw)
        return np.exp(lw - top)

    def birth_spatial(self, J: Sequence[int]) -> ParticleSet:
        if self.motion is None:
            raise ValueError("backend has no motion model")
        return birth_spatial_mc(self, J, self.motion)


def log_psi_bar_mc(draw: ProposalDraw) -> float:
    return _log_mean(draw.log_weights)


def psi_bar_mc(draw: ProposalDraw) -> float:
    """Importance-sampling estimate: mean of the importance weights."""
    return float(math.exp(log_psi_bar_mc(draw)))


def birth_spatial_mc(backend: MonteCarloBackend, J: Sequence[int], motion: MotionModel,
                     ess_floor: float = 0.01) -> ParticleSet:
    """Weighted posterior samples, systematically resampled and pushed through the motion model."""
    if not any(j > 0 for j in J):
        states = backend.prior.sample(backend.rng, backend.n_particles)
        log.debug("birth_spatial_mc: all-missed tuple, predicted prior returned")
        return ParticleSet.uniform(motion.propagate(states, backend.rng))
    draw = backend.draw_proposal(J)
    samples = draw.samples
    if samples.weights.sum() <= 0:
        raise ValueError(f"tuple {tuple(J)} has zero importance weight everywhere")
    samples = samples.normalized()
    if samples.ess() < ess_floor * len(samples):
        backend.n_degenerate += 1
        log.warning("birth_spatial_mc: effective sample size %.1f below %.0f%% of %d",
                    samples.ess(), 100 * ess_floor, len(samples))
    idx = systematic_resample(samples.weights, backend.rng)
    return ParticleSet.uniform(motion.propagate(samples.states[idx], backend.rng))
