"""Measurement association and unassociation probabilities.

``r_A`` is the probability that a measurement is explained by an existing
track; ``r_U(J)`` is the probability that a whole measurement tuple is
unexplained by existing tracks.  Existing tracks here come from an LMB
density, so ``r_A`` is built from marginal (track-wise) association
probabilities of the single-sensor LMB update.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from msab.core import GaussianDensity, LmbDensity, ParticleSet, SensorModel

R_A_MAX = 1.0 - 1e-9


@dataclass(frozen=True)
class AssociationTable:
    """Per-sensor association probabilities, indexed so that entry 0 is the missed detection.

    ``per_sensor[s][j]`` holds ``r_A`` of measurement ``j`` of sensor ``s``
    (1-based); ``per_sensor[s][0]`` is always 0.
    """

    per_sensor: tuple

    @classmethod
    def from_vectors(cls, vectors: Sequence[Sequence[float]]) -> "AssociationTable":
        """Build from per-sensor r_A vectors over measurements 1..m (no 0 entry)."""
        rows = []
        for v in vectors:
            v = np.clip(np.asarray(v, dtype=float).reshape(-1), 0.0, R_A_MAX)
            rows.append(np.concatenate([[0.0], v]))
        return cls(tuple(rows))

    @classmethod
    def zeros(cls, sizes: Sequence[int]) -> "AssociationTable":
        return cls(tuple(np.zeros(m + 1) for m in sizes))

    @property
    def sizes(self) -> tuple:
        return tuple(len(r) - 1 for r in self.per_sensor)

    @property
    def n_sensors(self) -> int:
        return len(self.per_sensor)

    def r_a(self, s: int, j: int) -> float:
        return float(self.per_sensor[s][j])


def unassociation_prob(J: Sequence[int], table: AssociationTable) -> float:
    """Product over sensors of ``1 - r_A(j_s)``."""
    if len(J) != table.n_sensors:
        raise ValueError(f"tuple length {len(J)} does not match {table.n_sensors} sensors")
    out = 1.0
    for row, j in zip(table.per_sensor, J):
        if not 0 <= j < len(row):
            raise IndexError(f"index {j} out of range for sensor with {len(row) - 1} measurements")
        out *= 1.0 - row[j]
    return out


def log_unassociation_prob(J: Sequence[int], table: AssociationTable) -> float:
    p = unassociation_prob(J, table)
    return float(np.log(p)) if p > 0 else -np.inf


def gaussian_innovation(g: GaussianDensity, sensor: SensorModel):
    """Predicted measurement, innovation covariance and gain for a (linearized) update."""
    H = sensor.jacobian(g.mean)
    zhat = sensor.h(g.mean)[0]
    PHt = g.cov @ H.T
    S = H @ PHt + sensor.R
    S = 0.5 * (S + S.T)
    K = np.linalg.solve(S, PHt.T).T
    return zhat, S, K


def log_measurement_likelihoods(spatial, z_set: np.ndarray, sensor: SensorModel) -> np.ndarray:
    """log of the predicted likelihood of each measurement under one track's spatial density."""
    m = len(z_set)
    if m == 0:
        return np.zeros(0)
    z_set = np.atleast_2d(z_set)
    if isinstance(spatial, GaussianDensity):
        zhat, S, _ = gaussian_innovation(spatial, sensor)
        d = sensor.residual(z_set, zhat)
        L = np.linalg.cholesky(S)
        u = np.linalg.solve(L, d.T)
        logdet = 2.0 * np.log(np.diag(L)).sum()
        return -0.5 * ((u * u).sum(axis=0) + logdet + sensor.meas_dim * np.log(2 * np.pi))
    if isinstance(spatial, ParticleSet):
        logw = np.log(np.maximum(spatial.weights / spatial.weights.sum(), 1e-300))
        ll = np.stack([sensor.log_likelihood(z, spatial.states) for z in z_set])
        return logsumexp(ll + logw, axis=1)
    raise TypeError(f"unsupported spatial density {type(spatial).__name__}")


def track_association_ratios(prior: LmbDensity, z_set: np.ndarray, sensor: SensorModel):
    """Missed-detection weights (n,) and detection likelihood ratios (n, m) per track.

    Detection ratio of track t and measurement j is ``r_t p_D q_tj / kappa(z_j)``;
    the missed weight is ``1 - r_t p_D``.  Returns log-likelihoods too.
    """
    n, m = len(prior), len(z_set)
    pd = sensor.detection_prob
    r = prior.existence
    missed = 1.0 - r * pd
    logq = np.zeros((n, m))
    if n and m:
        logq = np.stack([log_measurement_likelihoods(c.spatial, z_set, sensor) for c in prior])
        log_kappa = np.log(sensor.kappa(z_set))
        with np.errstate(divide="ignore"):
            log_ratio = np.log(r * pd)[:, None] + logq - log_kappa[None, :]
        detect = np.exp(np.minimum(log_ratio, 700.0))
    else:
        detect = np.zeros((n, m))
    return missed, detect, logq


def marginal_association(missed: np.ndarray, detect: np.ndarray,
                         max_iter: int = 200, tol: float = 1e-10) -> np.ndarray:
    """Marginal association probabilities by loopy belief propagation.

    Returns ``beta`` of shape (n, m + 1); column 0 is the missed/non-existing
    event, columns 1..m the measurements.  Exact for a single track.
    """
    n, m = detect.shape
    beta = np.zeros((n, m + 1))
    if n == 0:
        return beta
    if m == 0:
        beta[:, 0] = 1.0
        return beta
    psi = detect / missed[:, None]
    mu = np.ones((n, m))  # messages measurement -> track
    for _ in range(max_iter):
        pm = psi * mu
        nu = psi / (1.0 + pm.sum(axis=1, keepdims=True) - pm)
        col = nu.sum(axis=0, keepdims=True)
        mu_new = 1.0 / (1.0 + col - nu)
        done = np.max(np.abs(mu_new - mu)) < tol
        mu = mu_new
        if done:
            break
    pm = psi * mu
    denom = 1.0 + pm.sum(axis=1)
    beta[:, 0] = 1.0 / denom
    beta[:, 1:] = pm / denom[:, None]
    return beta


def lmb_association_probs(prior: LmbDensity, z_set: np.ndarray, sensor: SensorModel) -> np.ndarray:
    """Per-measurement probability of being explained by some track, clipped to [0, 1]."""
    m = len(z_set)
    if len(prior) == 0 or m == 0:
        return np.zeros(m)
    missed, detect, _ = track_association_ratios(prior, z_set, sensor)
    beta = marginal_association(missed, detect)
    return np.minimum(1.0, beta[:, 1:].sum(axis=0))
