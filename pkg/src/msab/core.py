"""Shared domain types: measurement tuples, birth labels, densities and sensors.

State vectors use the planar constant-velocity layout ``[p_x, v_x, p_y, v_y]``
throughout the package.  Measurement tuples are plain ``tuple[int, ...]`` with
one entry per sensor; entry 0 means the sensor missed the object and entry
``j >= 1`` selects the j-th (1-based) measurement of that sensor's scan.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Sequence, Union

import numpy as np

POSITION_IDX = (0, 2)
VELOCITY_IDX = (1, 3)
LOG_2PI = math.log(2.0 * math.pi)
PD_FLOOR = 1e-12

MeasurementTuple = tuple


def validate_tuple(J: Sequence[int], sizes: Sequence[int]) -> tuple:
    """Check ``J`` against per-sensor scan sizes and return it as a tuple."""
    J = tuple(int(j) for j in J)
    if len(J) != len(sizes):
        raise ValueError(f"tuple has {len(J)} entries, expected {len(sizes)} sensors")
    for s, (j, m) in enumerate(zip(J, sizes)):
        if not 0 <= j <= m:
            raise IndexError(f"index {j} out of range [0, {m}] for sensor {s}")
    return J


def non_missed_count(J: Sequence[int]) -> int:
    return sum(1 for j in J if j > 0)


class BirthLabel(NamedTuple):
    """Label of an object born at ``timestep`` from measurement tuple ``tuple``."""

    timestep: int
    tuple: tuple


def tuple_to_label(J: Sequence[int], k: int) -> BirthLabel:
    return BirthLabel(int(k), tuple(int(j) for j in J))


def label_to_tuple(label: BirthLabel) -> tuple:
    return label.tuple


def is_symmetric(P: np.ndarray, rtol: float = 1e-9) -> bool:
    scale = np.abs(P).max()
    return bool(np.abs(P - P.T).max() <= rtol * max(scale, 1e-300))


def is_positive_definite(P: np.ndarray) -> bool:
    """Symmetric, Cholesky-factorizable and eigenvalues above ``1e-12 * trace``."""
    if not is_symmetric(P):
        return False
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        return False
    return bool(np.linalg.eigvalsh(P).min() > PD_FLOOR * np.trace(P))


@dataclass(frozen=True)
class GaussianDensity:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        cov = 0.5 * (cov + cov.T)
        if cov.shape != (mean.size, mean.size):
            raise ValueError("covariance shape does not match mean")
        if not is_positive_definite(cov):
            raise ValueError("covariance is not symmetric positive definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        L = np.linalg.cholesky(self.cov)
        d = np.linalg.solve(L, (x - self.mean).T)
        logdet = 2.0 * np.log(np.diag(L)).sum()
        return -0.5 * ((d * d).sum(axis=0) + logdet + self.dim * LOG_2PI)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        L = np.linalg.cholesky(self.cov)
        return self.mean + rng.standard_normal((n, self.dim)) @ L.T


@dataclass(frozen=True)
class ParticleSet:
    """Weighted samples; ``states`` has shape (N, n_x)."""

    states: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if weights.size != states.shape[0]:
            raise ValueError("one weight per particle required")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and non-negative")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, states: np.ndarray) -> "ParticleSet":
        states = np.atleast_2d(states)
        n = states.shape[0]
        return cls(states, np.full(n, 1.0 / n))

    def __len__(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def normalized(self) -> "ParticleSet":
        total = self.weights.sum()
        if total <= 0:
            raise ValueError("cannot normalize particle set with zero total weight")
        return ParticleSet(self.states, self.weights / total)

    @property
    def mean(self) -> np.ndarray:
        w = self.weights / self.weights.sum()
        return w @ self.states

    @property
    def cov(self) -> np.ndarray:
        w = self.weights / self.weights.sum()
        d = self.states - w @ self.states
        return (w[:, None] * d).T @ d

    def ess(self) -> float:
        w = self.weights / self.weights.sum()
        return float(1.0 / np.sum(w * w))


Spatial = Union[GaussianDensity, ParticleSet]


@dataclass(frozen=True)
class BernoulliComponent:
    label: BirthLabel
    existence: float
    spatial: Spatial

    def __post_init__(self):
        if not 0.0 <= self.existence <= 1.0:
            raise ValueError(f"existence {self.existence} outside [0, 1]")


@dataclass(frozen=True)
class LmbDensity:
    components: tuple = ()

    def __post_init__(self):
        comps = tuple(self.components)
        labels = [c.label for c in comps]
        if len(set(labels)) != len(labels):
            raise ValueError("LMB components must carry distinct labels")
        object.__setattr__(self, "components", comps)

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self) -> Iterator[BernoulliComponent]:
        return iter(self.components)

    @property
    def labels(self) -> list:
        return [c.label for c in self.components]

    @property
    def existence(self) -> np.ndarray:
        return np.array([c.existence for c in self.components], dtype=float)

    def union(self, other: "LmbDensity") -> "LmbDensity":
        return LmbDensity(self.components + other.components)


def wrap_angle(a):
    return (np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi


class SensorModel:
    """Single-sensor detection, clutter and measurement model.

    Subclasses provide the measurement function ``h``, its Jacobian and an
    inverse on the observable (position) coordinates.  Clutter is Poisson
    with rate ``clutter_rate`` spread uniformly over the observation window,
    so the clutter intensity is the constant ``clutter_rate / window_volume``.
    """

    detection_prob: float
    clutter_rate: float
    R: np.ndarray
    angular_dims: tuple = ()

    def _init_common(self, R, detection_prob, clutter_rate):
        R = np.atleast_2d(np.asarray(R, dtype=float))
        if not is_positive_definite(R):
            raise ValueError("measurement covariance must be symmetric positive definite")
        if not 0.0 <= detection_prob < 1.0:
            raise ValueError("detection probability must lie in [0, 1)")
        if clutter_rate < 0:
            raise ValueError("clutter rate must be non-negative")
        self.R = R
        self.R_inv = np.linalg.inv(R)
        self.R_chol = np.linalg.cholesky(R)
        self.logdet_R = 2.0 * float(np.log(np.diag(self.R_chol)).sum())
        self.detection_prob = float(detection_prob)
        self.clutter_rate = float(clutter_rate)

    @property
    def meas_dim(self) -> int:
        return self.R.shape[0]

    @property
    def window_volume(self) -> float:
        raise NotImplementedError

    @property
    def clutter_intensity(self) -> float:
        return self.clutter_rate / self.window_volume

    def kappa(self, z: np.ndarray) -> np.ndarray:
        """Clutter intensity at each row of ``z``."""
        z = np.atleast_2d(z)
        return np.full(z.shape[0], self.clutter_intensity)

    def residual(self, z: np.ndarray, zhat: np.ndarray) -> np.ndarray:
        d = np.asarray(z, dtype=float) - zhat
        for i in self.angular_dims:
            d[..., i] = wrap_angle(d[..., i])
        return d

    def log_likelihood(self, z: np.ndarray, x: np.ndarray) -> np.ndarray:
        """log g(z | x) for each row of ``x`` (shape (N, n_x))."""
        d = self.residual(z, self.h(np.atleast_2d(x)))
        u = np.linalg.solve(self.R_chol, d.T)
        return -0.5 * ((u * u).sum(axis=0) + self.logdet_R + self.meas_dim * LOG_2PI)

    def sample_measurement(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        z = self.h(np.atleast_2d(x))[0] + self.R_chol @ rng.standard_normal(self.meas_dim)
        for i in self.angular_dims:
            z[i] = wrap_angle(z[i])
        return z

    def sample_clutter(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def h(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inverse(self, z: np.ndarray) -> tuple:
        """Return (observable state, Jacobian of the inverse at ``z``)."""
        raise NotImplementedError


class LinearGaussianSensor(SensorModel):
    """z = H x + v, v ~ N(0, R); observation window is an axis-aligned box."""

    def __init__(self, H, R, detection_prob, clutter_rate, window,
                 observable_dims: Sequence[int] = POSITION_IDX):
        self._init_common(R, detection_prob, clutter_rate)
        self.H = np.atleast_2d(np.asarray(H, dtype=float))
        if self.H.shape[0] != self.meas_dim:
            raise ValueError("H rows must match measurement dimension")
        lo, hi = (np.asarray(w, dtype=float) for w in window)
        if lo.shape != (self.meas_dim,) or np.any(hi <= lo):
            raise ValueError("window must be (lo, hi) with hi > lo per measurement dim")
        self.window = (lo, hi)
        self.observable_dims = tuple(observable_dims)
        H_o = self.H[:, self.observable_dims]
        if H_o.shape[0] == H_o.shape[1] and abs(np.linalg.det(H_o)) > 0:
            self._H_o_inv = np.linalg.inv(H_o)
        else:
            self._H_o_inv = None

    @classmethod
    def position(cls, sigma, detection_prob, clutter_rate, window):
        """XY-position sensor for the ``[p_x, v_x, p_y, v_y]`` state layout."""
        H = np.kron(np.eye(2), np.array([[1.0, 0.0]]))
        R = np.diag([sigma ** 2, sigma ** 2])
        return cls(H, R, detection_prob, clutter_rate, window)

    @property
    def window_volume(self) -> float:
        lo, hi = self.window
        return float(np.prod(hi - lo))

    def h(self, x):
        return np.atleast_2d(x) @ self.H.T

    def jacobian(self, x):
        return self.H

    def inverse(self, z):
        if self._H_o_inv is None:
            raise ValueError("sensor is not invertible on its observable dimensions")
        return self._H_o_inv @ np.asarray(z, dtype=float), self._H_o_inv

    def sample_clutter(self, rng, n):
        lo, hi = self.window
        return rng.uniform(lo, hi, size=(n, self.meas_dim))


class BearingRangeSensor(SensorModel):
    """Bearing-from-north and range to a sensor at ``position``.

    The bearing is ``atan2(s_x - p_x, s_y - p_y)``, i.e. the direction from
    the target to the sensor measured clockwise from the +y axis.
    """

    angular_dims = (0,)
    observable_dims = POSITION_IDX

    def __init__(self, position, R, detection_prob, clutter_rate, max_range):
        self._init_common(R, detection_prob, clutter_rate)
        self.position = np.asarray(position, dtype=float).reshape(2)
        self.max_range = float(max_range)

    @property
    def window_volume(self) -> float:
        return 2.0 * math.pi * self.max_range

    def h(self, x):
        x = np.atleast_2d(x)
        dx = self.position[0] - x[:, 0]
        dy = self.position[1] - x[:, 2]
        return np.column_stack([np.arctan2(dx, dy), np.hypot(dx, dy)])

    def jacobian(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        dx = self.position[0] - x[0]
        dy = self.position[1] - x[2]
        r2 = dx * dx + dy * dy
        r = math.sqrt(r2)
        J = np.zeros((2, x.size))
        # d(alpha)/d(p_x), d(alpha)/d(p_y)
        J[0, 0] = -dy / r2
        J[0, 2] = dx / r2
        J[1, 0] = -dx / r
        J[1, 2] = -dy / r
        return J

    def inverse(self, z):
        alpha, r = float(z[0]), float(z[1])
        sa, ca = math.sin(alpha), math.cos(alpha)
        pos = self.position - r * np.array([sa, ca])
        # columns: d/d(alpha), d/d(r)
        jac = np.array([[-r * ca, -sa], [r * sa, -ca]])
        return pos, jac

    def sample_clutter(self, rng, n):
        return np.column_stack([rng.uniform(-np.pi, np.pi, n),
                                rng.uniform(0.0, self.max_range, n)])


def pseudolikelihood(x: np.ndarray, j: int, z_set: np.ndarray, sensor: SensorModel):
    """Single-sensor pseudolikelihood: ``1 - p_D`` for j = 0, else p_D g(z_j|x) / kappa(z_j)."""
    z_set = np.atleast_2d(z_set) if len(z_set) else np.zeros((0, sensor.meas_dim))
    if not 0 <= j <= z_set.shape[0]:
        raise IndexError(f"measurement index {j} out of range [0, {z_set.shape[0]}]")
    x = np.atleast_2d(x)
    if j == 0:
        out = np.full(x.shape[0], 1.0 - sensor.detection_prob)
    else:
        z = z_set[j - 1]
        out = sensor.detection_prob * np.exp(sensor.log_likelihood(z, x)) / sensor.kappa(z)[0]
    return out if out.size > 1 else float(out[0])


@dataclass(frozen=True)
class MotionModel:
    F: np.ndarray
    Q: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if not is_symmetric(Q) or np.linalg.eigvalsh(0.5 * (Q + Q.T)).min() < -1e-9 * max(np.trace(Q), 1.0):
            raise ValueError("process noise must be symmetric positive semi-definite")
        object.__setattr__(self, "F", np.asarray(self.F, dtype=float))
        object.__setattr__(self, "Q", 0.5 * (Q + Q.T))

    @classmethod
    def constant_velocity(cls, dt: float = 1.0, accel_std: Sequence[float] = (5.0, 5.0)):
        """Planar CV model with white acceleration noise per axis."""
        F1 = np.array([[1.0, dt], [0.0, 1.0]])
        G1 = np.array([[dt * dt / 2.0], [dt]])
        F = np.kron(np.eye(2), F1)
        Q = np.zeros((4, 4))
        for axis, sigma in enumerate(accel_std):
            sl = slice(2 * axis, 2 * axis + 2)
            Q[sl, sl] = sigma ** 2 * (G1 @ G1.T)
        return cls(F, Q, dt)

    @property
    def state_dim(self) -> int:
        return self.F.shape[0]

    def predict_gaussian(self, g: GaussianDensity) -> GaussianDensity:
        return GaussianDensity(self.F @ g.mean, self.F @ g.cov @ self.F.T + self.Q)

    def propagate(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        out = states @ self.F.T
        if np.any(self.Q):
            w, V = np.linalg.eigh(self.Q)
            S = V * np.sqrt(np.clip(w, 0.0, None))
            out = out + rng.standard_normal(out.shape) @ S.T
        return out

    def predict_particles(self, p: ParticleSet, rng: np.random.Generator) -> ParticleSet:
        return ParticleSet(self.propagate(p.states, rng), p.weights)
