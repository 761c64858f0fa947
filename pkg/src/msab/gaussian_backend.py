"""Closed-form linear-Gaussian evaluation of the tuple evidence and birth densities.

For a tuple J the evidence is the prior expectation of the multi-sensor
pseudolikelihood.  With a Gaussian prior N(mu0, P0) and linear-Gaussian
sensors it reduces to information-form sums::

    M_J = P0^-1 + sum_{j_s > 0} H_s' R_s^-1 H_s
    b_J = P0^-1 mu0 + sum_{j_s > 0} H_s' R_s^-1 z_s
    c_J = mu0' P0^-1 mu0 + sum_{j_s > 0} z_s' R_s^-1 z_s

Everything is evaluated in log space; the exponential term
``-(c_J - b_J' M_J^-1 b_J) / 2`` is never formed bare.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import lapack

from msab.association import AssociationTable
from msab.core import (
    LOG_2PI,
    GaussianDensity,
    LinearGaussianSensor,
    MotionModel,
)


class NumericalError(RuntimeError):
    """Information matrix failed to factorize."""


@dataclass(frozen=True)
class SensorCache:
    HtRinv: np.ndarray
    HtRinvH: np.ndarray
    R_inv: np.ndarray
    logdet_R: float
    n_z: int
    log_pd: float
    log_miss: float


@dataclass(frozen=True)
class PrecomputeCache:
    """Quantities that depend only on the prior and sensor models."""

    P0_inv: np.ndarray
    P0_inv_mu0: np.ndarray
    c0: float
    logdet_P0: float
    sensors: tuple

    @classmethod
    def build(cls, prior: GaussianDensity, sensors: Sequence[LinearGaussianSensor]) -> "PrecomputeCache":
        for s in sensors:
            if not isinstance(s, LinearGaussianSensor):
                raise TypeError("the Gaussian backend supports linear-Gaussian sensors only; "
                                "use the Monte Carlo backend for nonlinear sensors")
        P0_inv = np.linalg.inv(prior.cov)
        P0_inv = 0.5 * (P0_inv + P0_inv.T)
        P0_inv_mu0 = P0_inv @ prior.mean
        per_sensor = []
        for s in sensors:
            HtRinv = s.H.T @ s.R_inv
            HtRinvH = HtRinv @ s.H
            per_sensor.append(SensorCache(
                HtRinv=HtRinv,
                HtRinvH=0.5 * (HtRinvH + HtRinvH.T),
                R_inv=s.R_inv,
                logdet_R=s.logdet_R,
                n_z=s.meas_dim,
                log_pd=math.log(s.detection_prob) if s.detection_prob > 0 else -math.inf,
                log_miss=math.log1p(-s.detection_prob),
            ))
        return cls(
            P0_inv=P0_inv,
            P0_inv_mu0=P0_inv_mu0,
            c0=float(prior.mean @ P0_inv_mu0),
            logdet_P0=float(np.linalg.slogdet(prior.cov)[1]),
            sensors=tuple(per_sensor),
        )


@dataclass
class InfoAccumulator:
    M: np.ndarray
    b: np.ndarray
    c: float
    log_norm: float  # log of the detection/clutter/determinant prefactors, excluding P0 and M


def _as_sets(z_sets) -> list:
    return [np.atleast_2d(np.asarray(z, dtype=float)) if len(z) else np.zeros((0, 0)) for z in z_sets]


def accumulate(J: Sequence[int], z_sets, cache: PrecomputeCache,
               log_kappa: Optional[Sequence[np.ndarray]] = None) -> InfoAccumulator:
    """Information-form sums over the detected entries of ``J``.

    ``log_kappa[s][j-1]`` is the log clutter intensity of measurement j of
    sensor s; when omitted the prefactor excludes clutter terms.
    """
    M = cache.P0_inv.copy()
    b = cache.P0_inv_mu0.copy()
    c = cache.c0
    log_norm = 0.0
    for s, j in enumerate(J):
        sc = cache.sensors[s]
        if j == 0:
            log_norm += sc.log_miss
            continue
        z = z_sets[s][j - 1]
        M += sc.HtRinvH
        b += sc.HtRinv @ z
        c += float(z @ sc.R_inv @ z)
        log_norm += sc.log_pd - 0.5 * (sc.n_z * LOG_2PI + sc.logdet_R)
        if log_kappa is not None:
            log_norm -= log_kappa[s][j - 1]
    return InfoAccumulator(M, b, c, log_norm)


def _cholesky(M: np.ndarray) -> np.ndarray:
    L, info = lapack.dpotrf(M, lower=1, clean=1)
    if info != 0:
        raise NumericalError("information matrix is not positive definite")
    return L


def _logdet_and_quad(M: np.ndarray, b: np.ndarray):
    """(log det M, b' M^-1 b) through one Cholesky factor."""
    L, info = lapack.dpotrf(M, lower=1, clean=0)
    if info != 0:
        raise NumericalError("information matrix is not positive definite")
    u, _ = lapack.dtrtrs(L, b, lower=1)
    d = L.diagonal().prod()
    logdet = 2.0 * (math.log(d) if 0.0 < d < math.inf else float(np.log(L.diagonal()).sum()))
    return logdet, float(u @ u)


def _info_mean(M: np.ndarray, b: np.ndarray) -> np.ndarray:
    x, info = lapack.dpotrs(_cholesky(M), b, lower=1)
    return x


def log_psi_bar_from(acc: InfoAccumulator, cache: PrecomputeCache) -> float:
    logdet_M, quad = _logdet_and_quad(acc.M, acc.b)
    return acc.log_norm - 0.5 * (cache.logdet_P0 + logdet_M) - 0.5 * (acc.c - quad)


def log_psi_bar(J: Sequence[int], z_sets, sensors, cache: PrecomputeCache) -> float:
    """log of the prior expectation of the multi-sensor pseudolikelihood for tuple ``J``."""
    z_sets = _as_sets(z_sets)
    log_kappa = [np.log(s.kappa(z)) if len(z) else np.zeros(0) for s, z in zip(sensors, z_sets)]
    return log_psi_bar_from(accumulate(J, z_sets, cache, log_kappa), cache)


class GaussianBackend:
    """Gaussian conditional-distribution backend bound to one scan of measurements."""

    def __init__(self, cache: PrecomputeCache, sensors: Sequence[LinearGaussianSensor],
                 z_sets, motion: Optional[MotionModel] = None):
        if len(sensors) != len(cache.sensors) or len(z_sets) != len(sensors):
            raise ValueError("sensors, cache and measurement sets must align")
        self.cache = cache
        self.sensors = list(sensors)
        self.z_sets = _as_sets(z_sets)
        self.motion = motion
        self.log_kappa = [np.log(s.kappa(z)) if len(z) else np.zeros(0)
                          for s, z in zip(self.sensors, self.z_sets)]
        self.sizes = tuple(len(z) for z in self.z_sets)
        # per-measurement information terms, index 0 unused (missed detection)
        n_x = cache.P0_inv.shape[0]
        self._info_vec, self._info_quad, self._log_const = [], [], []
        for sc, z, lk in zip(cache.sensors, self.z_sets, self.log_kappa):
            m = len(z)
            v = np.zeros((m + 1, n_x))
            q = np.zeros(m + 1)
            const = np.full(m + 1, sc.log_miss)
            if m:
                v[1:] = z @ sc.HtRinv.T
                q[1:] = np.einsum("ij,jk,ik->i", z, sc.R_inv, z)
                const[1:] = sc.log_pd - 0.5 * (sc.n_z * LOG_2PI + sc.logdet_R) - lk
            self._info_vec.append(v)
            self._info_quad.append(q)
            self._log_const.append(const)

    @classmethod
    def from_prior(cls, prior: GaussianDensity, sensors, z_sets, motion=None) -> "GaussianBackend":
        return cls(PrecomputeCache.build(prior, sensors), sensors, z_sets, motion)

    def accumulate(self, J) -> InfoAccumulator:
        return accumulate(J, self.z_sets, self.cache, self.log_kappa)

    def log_psi_bar(self, J) -> float:
        return log_psi_bar_from(self.accumulate(J), self.cache)

    def psi_bar(self, J) -> float:
        return math.exp(self.log_psi_bar(J))

    def log_conditional_weights(self, s: int, J: Sequence[int], table: AssociationTable,
                                active: Optional[np.ndarray] = None) -> np.ndarray:
        """Unnormalized log p(j_s = j | J^-s) for j = 0..m_s; inactive entries are -inf.

        Every candidate is evaluated from a fresh accumulation of the full tuple.
        """
        m = self.sizes[s]
        r_a = table.per_sensor[s]
        ok = r_a < 1.0
        if active is not None:
            ok &= active
        ok[0] = active is None or bool(active[0])
        idx = np.flatnonzero(ok)
        out = np.full(m + 1, -np.inf)
        if idx.size == 0:
            return out
        cache = self.cache
        detected = [(t, jt) for t, jt in enumerate(J) if jt and t != s]
        log_det = np.empty(idx.size)
        log_phi = np.empty(idx.size)
        for i, j in enumerate(idx.tolist()):
            M = cache.P0_inv.copy()
            b = cache.P0_inv_mu0.copy()
            c = cache.c0
            for t, jt in detected:
                M += cache.sensors[t].HtRinvH
                b += self._info_vec[t][jt]
                c += self._info_quad[t][jt]
            if j:
                M += cache.sensors[s].HtRinvH
                b += self._info_vec[s][j]
                c += self._info_quad[s][j]
            log_det[i], quad = _logdet_and_quad(M, b)
            log_phi[i] = -0.5 * (c - quad)
        out[idx] = self._log_const[s][idx] + np.log1p(-r_a[idx]) - 0.5 * log_det + log_phi
        return out

    def conditional_weights(self, s: int, J: Sequence[int], table: AssociationTable,
                            active: Optional[np.ndarray] = None) -> np.ndarray:
        """Weights proportional to p(j_s | J^-s), scaled so the largest is 1."""
        lw = self.log_conditional_weights(s, J, table, active)
        top = lw.max()
        if not np.isfinite(top):
            return np.zeros_like(lw)
        return np.exp(lw - top)

    def posterior(self, J) -> GaussianDensity:
        """Birth prior conditioned on the detected measurements of ``J`` (not predicted)."""
        acc = self.accumulate(J)
        return GaussianDensity(_info_mean(acc.M, acc.b), np.linalg.inv(acc.M))

    def birth_spatial(self, J) -> GaussianDensity:
        """Posterior predicted one step through the motion model: N(F m, F M^-1 F' + Q)."""
        if self.motion is None:
            raise ValueError("backend has no motion model")
        post = self.posterior(J)
        return self.motion.predict_gaussian(post)


def birth_spatial(J, z_sets, cache: PrecomputeCache, motion: MotionModel) -> GaussianDensity:
    acc = accumulate(J, _as_sets(z_sets), cache)
    return motion.predict_gaussian(GaussianDensity(_info_mean(acc.M, acc.b), np.linalg.inv(acc.M)))
