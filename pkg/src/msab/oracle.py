"""Brute-force references for small instances.

Nothing here is meant to scale.  The exact tuple distribution walks the full
product space, and the tiny delta-GLMB update enumerates every
(prior hypothesis, label set, association map) triple.  Gaussian quantities
are recomputed by sequential Kalman conditioning rather than through the
information-form sums used by the backends, so the two routes can be
checked against each other.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Hashable, Mapping, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from msab.association import AssociationTable, log_unassociation_prob
from msab.core import (
    LOG_2PI,
    GaussianDensity,
    LinearGaussianSensor,
    LmbDensity,
    MotionModel,
)

MAX_TUPLES = 10 ** 6
MAX_GLMB_LABELS = 4
MAX_GLMB_SENSORS = 2
MAX_GLMB_MEASUREMENTS = 2


class OracleSizeError(ValueError):
    """Instance too large for exhaustive enumeration."""


# -- exact tuple distribution ----------------------------------------------------

@dataclass(frozen=True)
class ExactTupleDistribution:
    entries: dict
    log_normalizer: float

    def __post_init__(self):
        total = sum(self.entries.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total}")

    @property
    def normalizer(self) -> float:
        return math.exp(self.log_normalizer)

    def prob(self, J) -> float:
        return self.entries.get(tuple(J), 0.0)

    def conditional(self, s: int, J) -> np.ndarray:
        """p(j_s = j | J^-s) for j = 0..m_s, read off the joint table."""
        J = list(J)
        p = []
        for J_s in sorted({K[s] for K in self.entries}):
            J[s] = J_s
            p.append(self.prob(J))
        p = np.asarray(p)
        return p / p.sum() if p.sum() > 0 else p

    def birth_existence(self, r_b_max: float, lambda_b: float) -> dict:
        return {J: min(r_b_max, p * lambda_b) for J, p in self.entries.items()}


def total_tuples(sizes: Sequence[int]) -> int:
    return math.prod(m + 1 for m in sizes)


def enumerate_exact(backend, table: AssociationTable,
                    max_tuples: int = MAX_TUPLES) -> ExactTupleDistribution:
    """p(J) proportional to r_U(J) times the evidence of J, over every tuple."""
    sizes = tuple(backend.sizes)
    n = total_tuples(sizes)
    if n > max_tuples:
        raise OracleSizeError(f"{n} tuples exceed the enumeration limit {max_tuples}")
    tuples = list(itertools.product(*(range(m + 1) for m in sizes)))
    logw = np.array([log_unassociation_prob(J, table) + backend.log_psi_bar(J) for J in tuples])
    if not np.any(np.isfinite(logw)):
        raise ValueError("every tuple has zero weight")
    log_z = float(logsumexp(logw))
    p = np.exp(logw - log_z)
    p /= p.sum()
    return ExactTupleDistribution(dict(zip(tuples, p.tolist())), log_z)


def total_variation(p: Mapping, q: Mapping) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def epsilon_truncation(existence, eps: float) -> set:
    """Labels (or tuples) whose birth existence is at least ``eps``.

    ``existence`` is a mapping label -> r_B or an LMB density.
    """
    if isinstance(existence, LmbDensity):
        existence = {c.label: c.existence for c in existence}
    return {k for k, r in existence.items() if r >= eps}


# -- independent Gaussian routes -------------------------------------------------

def kalman_condition(prior: GaussianDensity, J: Sequence[int], z_sets,
                     sensors: Sequence[LinearGaussianSensor]):
    """Condition ``prior`` on the detected measurements of ``J`` one sensor at a time.

    Returns the posterior and the log marginal likelihood of those measurements.
    """
    m, P = prior.mean.copy(), prior.cov.copy()
    log_ml = 0.0
    for s, j in enumerate(J):
        if j == 0:
            continue
        sen = sensors[s]
        z = np.asarray(z_sets[s][j - 1], dtype=float)
        S = sen.H @ P @ sen.H.T + sen.R
        S = 0.5 * (S + S.T)
        d = z - sen.H @ m
        sign, logdet = np.linalg.slogdet(S)
        log_ml += -0.5 * (d @ np.linalg.solve(S, d) + logdet + len(z) * LOG_2PI)
        K = P @ sen.H.T @ np.linalg.inv(S)
        m = m + K @ d
        I_KH = np.eye(len(m)) - K @ sen.H
        P = I_KH @ P @ I_KH.T + K @ sen.R @ K.T  # Joseph form
    return GaussianDensity(m, 0.5 * (P + P.T)), log_ml


def log_psi_bar_kalman(prior: GaussianDensity, J, z_sets, sensors) -> float:
    """Tuple evidence via sequential conditioning plus detection/clutter prefactors."""
    _, log_ml = kalman_condition(prior, J, z_sets, sensors)
    out = log_ml
    for s, j in enumerate(J):
        sen = sensors[s]
        if j == 0:
            out += math.log1p(-sen.detection_prob)
        else:
            out += math.log(sen.detection_prob) - math.log(float(sen.kappa(z_sets[s][j - 1])[0]))
    return out


def psi_bar_quadrature(prior: GaussianDensity, J, z_sets, sensors, half_width: float = 12.0,
                       epsrel: float = 1e-10) -> float:
    """Tuple evidence by adaptive 2-D quadrature; states must be 2-D.

    The integration box covers the prior and every detected measurement
    (mapped back through H) by ``half_width`` standard deviations.
    """
    if prior.dim != 2:
        raise ValueError("quadrature reference supports 2-D states only")
    detected = [(s, j) for s, j in enumerate(J) if j > 0]
    const = 0.0
    for s, j in enumerate(J):
        sen = sensors[s]
        if j == 0:
            const += math.log1p(-sen.detection_prob)
        else:
            const += math.log(sen.detection_prob) - math.log(float(sen.kappa(z_sets[s][j - 1])[0]))
    if not detected:
        return math.exp(const)
    centers, widths = [], []
    for s, j in detected:
        sen = sensors[s]
        Hinv = np.linalg.inv(sen.H)
        centers.append(Hinv @ np.asarray(z_sets[s][j - 1], dtype=float))
        widths.append(np.sqrt(np.diag(Hinv @ sen.R @ Hinv.T)))
    centers, widths = np.array(centers), np.array(widths)
    # the integrand mass sits where the likelihoods overlap; the tightest one bounds it
    tight = widths.max(axis=1).argmin()
    lo = centers[tight] - half_width * widths[tight] - np.ptp(centers, axis=0)
    hi = centers[tight] + half_width * widths[tight] + np.ptp(centers, axis=0)

    # each factor is a 2-D Gaussian in x; precompute precision and log normalizer once
    factors = [(prior.mean, np.linalg.inv(prior.cov), -0.5 * (np.linalg.slogdet(prior.cov)[1] + 2 * LOG_2PI))]
    for s, j in detected:
        sen = sensors[s]
        Hinv = np.linalg.inv(sen.H)
        # N(z; Hx, R) = |det H|^-1 N(x; H^-1 z, H^-1 R H^-T)
        C = Hinv @ sen.R @ Hinv.T
        norm = -0.5 * (np.linalg.slogdet(C)[1] + 2 * LOG_2PI) - np.linalg.slogdet(sen.H)[1]
        factors.append((Hinv @ np.asarray(z_sets[s][j - 1], dtype=float), np.linalg.inv(C), norm))
    factors = [(float(m[0]), float(m[1]), float(P[0, 0]), float(P[0, 1] + P[1, 0]), float(P[1, 1]), float(c))
               for m, P, c in factors]

    def log_integrand(x):
        out = 0.0
        for m0, m1, a, b, d, c in factors:
            u, v = x[0] - m0, x[1] - m1
            out += c - 0.5 * (a * u * u + b * u * v + d * v * v)
        return out

    # rescale by the integrand peak so the integrator sees O(1) values
    probe = np.stack(np.meshgrid(np.linspace(lo[0], hi[0], 41), np.linspace(lo[1], hi[1], 41)), -1).reshape(-1, 2)
    shift = max(log_integrand(x) for x in probe)
    val, _ = integrate.dblquad(lambda y, x: math.exp(log_integrand((x, y)) - shift),
                               lo[0], hi[0], lo[1], hi[1], epsabs=0.0, epsrel=epsrel)
    return math.exp(const + shift) * val


def stacked_least_squares(prior: GaussianDensity, J, z_sets, sensors) -> np.ndarray:
    """Weighted least-squares fusion of the prior mean and detected measurements.

    Every block (prior as a pseudo-measurement of the full state, then each
    detected measurement) is whitened by its covariance's Cholesky factor and
    the stacked system is solved with ``lstsq``.
    """
    rows, rhs = [], []
    Lp = np.linalg.cholesky(prior.cov)
    rows.append(np.linalg.solve(Lp, np.eye(prior.dim)))
    rhs.append(np.linalg.solve(Lp, prior.mean))
    for s, j in enumerate(J):
        if j == 0:
            continue
        sen = sensors[s]
        L = np.linalg.cholesky(sen.R)
        rows.append(np.linalg.solve(L, sen.H))
        rhs.append(np.linalg.solve(L, np.asarray(z_sets[s][j - 1], dtype=float)))
    A, y = np.vstack(rows), np.concatenate(rhs)
    return np.linalg.lstsq(A, y, rcond=None)[0]


# -- tiny delta-GLMB ------------------------------------------------------------------

@dataclass(frozen=True)
class GlmbHypothesis:
    labels: frozenset
    assoc: tuple  # sorted (label, per-sensor measurement tuple) pairs; () for a prior
    weight: float

    def tuple_of(self, label) -> tuple:
        return dict(self.assoc)[label]


@dataclass
class TinyGlmb:
    """Hypothesis list plus one Gaussian per (label, association) key.

    Prior densities are keyed ``(label, ())``.
    """

    hypotheses: list
    densities: dict = field(default_factory=dict)

    def __post_init__(self):
        total = sum(h.weight for h in self.hypotheses)
        if self.hypotheses and abs(total - 1.0) > 1e-9:
            raise ValueError(f"hypothesis weights sum to {total}")

    @classmethod
    def from_tracks(cls, tracks: Mapping[Hashable, tuple]) -> "TinyGlmb":
        """Independent tracks ``label -> (existence, GaussianDensity)`` expanded into hypotheses."""
        labels = list(tracks)
        hyps = []
        for keep in itertools.product((False, True), repeat=len(labels)):
            w = 1.0
            for lab, k in zip(labels, keep):
                r = tracks[lab][0]
                w *= r if k else 1.0 - r
            if w > 0:
                I = frozenset(lab for lab, k in zip(labels, keep) if k)
                hyps.append(GlmbHypothesis(I, (), w))
        return cls(hyps, {(lab, ()): tracks[lab][1] for lab in labels})

    @property
    def labels(self) -> set:
        return {lab for lab, _ in self.densities}

    def existence(self, label) -> float:
        return sum(h.weight for h in self.hypotheses if label in h.labels)

    def cardinality_pmf(self) -> np.ndarray:
        n = max((len(h.labels) for h in self.hypotheses), default=0)
        out = np.zeros(n + 1)
        for h in self.hypotheses:
            out[len(h.labels)] += h.weight
        return out


def _injective_maps(n_labels: int, m: int):
    """All maps from n labels into {0..m} that are one-to-one on non-zero values."""
    for combo in itertools.product(range(m + 1), repeat=n_labels):
        nz = [c for c in combo if c]
        if len(nz) == len(set(nz)):
            yield combo


def _check_glmb_size(n_labels: int, sizes: Sequence[int]):
    if n_labels > MAX_GLMB_LABELS or len(sizes) > MAX_GLMB_SENSORS or any(m > MAX_GLMB_MEASUREMENTS for m in sizes):
        raise OracleSizeError(
            f"tiny GLMB limited to {MAX_GLMB_LABELS} labels, {MAX_GLMB_SENSORS} sensors, "
            f"{MAX_GLMB_MEASUREMENTS} measurements per sensor")


@dataclass
class GlmbEnumeration:
    """Unnormalized posterior terms: (hypothesis, psi-bar per label) and densities."""

    terms: list
    densities: dict
    birth_labels: frozenset


def enumerate_glmb_posterior(prior: TinyGlmb, birth: LmbDensity, z_sets, sensors,
                             motion: MotionModel, p_survival: float) -> GlmbEnumeration:
    """Every (I, I+, theta+) term of the one-step update with its unnormalized weight."""
    z_sets = [np.atleast_2d(np.asarray(z, dtype=float)) if len(z) else np.zeros((0, s.meas_dim))
              for s, z in zip(sensors, z_sets)]
    sizes = [len(z) for z in z_sets]
    existing = sorted(prior.labels, key=repr)
    if set(existing) & set(birth.labels):
        raise ValueError("birth labels collide with existing labels")
    _check_glmb_size(len(existing) + len(birth), sizes)
    for s in sensors:
        if not isinstance(s, LinearGaussianSensor):
            raise TypeError("tiny GLMB supports linear-Gaussian sensors only")

    predicted = {lab: motion.predict_gaussian(prior.densities[(lab, ())]) for lab in existing}
    r_birth = {}
    for c in birth:
        predicted[c.label] = c.spatial
        r_birth[c.label] = c.existence

    cache = {}

    def label_term(lab, J):
        key = (lab, J)
        if key not in cache:
            post, _ = kalman_condition(predicted[lab], J, z_sets, sensors)
            cache[key] = (math.exp(log_psi_bar_kalman(predicted[lab], J, z_sets, sensors)), post)
        return cache[key]

    terms = []
    for hyp in prior.hypotheses:
        # births enter every I+ choice; non-surviving existing labels are simply absent
        pool = sorted(hyp.labels, key=repr) + sorted(r_birth, key=repr)
        for keep in itertools.product((False, True), repeat=len(pool)):
            I_plus = [lab for lab, k in zip(pool, keep) if k]
            w0 = hyp.weight
            for lab, k in zip(pool, keep):
                if lab in r_birth:
                    w0 *= r_birth[lab] if k else 1.0 - r_birth[lab]
                else:
                    w0 *= p_survival if k else 1.0 - p_survival
            if w0 == 0.0:
                continue
            per_sensor = [list(_injective_maps(len(I_plus), m)) for m in sizes]
            for maps in itertools.product(*per_sensor):
                w = w0
                psis = {}
                assoc = []
                for i, lab in enumerate(I_plus):
                    J = tuple(maps[s][i] for s in range(len(sizes)))
                    psi, _ = label_term(lab, J)
                    psis[lab] = psi
                    assoc.append((lab, J))
                    w *= psi
                h = GlmbHypothesis(frozenset(I_plus), tuple(sorted(assoc, key=repr)), w)
                terms.append((h, psis))
    densities = {key: val[1] for key, val in cache.items()}
    return GlmbEnumeration(terms, densities, frozenset(r_birth))


def _merge_terms(terms) -> dict:
    out = {}
    for h, _ in terms:
        key = (h.labels, h.assoc)
        out[key] = out.get(key, 0.0) + h.weight
    return out


def tiny_glmb_update(prior: TinyGlmb, birth: LmbDensity, z_sets, sensors,
                     motion: MotionModel, p_survival: float = 0.99) -> TinyGlmb:
    """Exhaustive one-step predict/update; the result is normalized."""
    enum = enumerate_glmb_posterior(prior, birth, z_sets, sensors, motion, p_survival)
    merged = _merge_terms(enum.terms)
    total = sum(merged.values())
    if not total > 0:
        raise ValueError("posterior has zero mass")
    hyps = [GlmbHypothesis(labels, assoc, w / total) for (labels, assoc), w in merged.items()]
    used = {pair for h in hyps for pair in h.assoc}
    return TinyGlmb(hyps, {k: v for k, v in enum.densities.items() if k in used})


@dataclass(frozen=True)
class BoundCheck:
    l1_distance: float
    bound: float
    K: float
    n_truncated_labels: int

    @property
    def holds(self) -> bool:
        return self.l1_distance <= self.bound * (1.0 + 1e-12) + 1e-300


def truncation_bound_check(prior: TinyGlmb, full_birth: LmbDensity, eps: float, z_sets, sensors,
                         motion: MotionModel, p_survival: float = 0.99) -> BoundCheck:
    """L1 gap between the full and epsilon-truncated posteriors against the polynomial bound.

    Both posteriors are kept as unnormalized hypothesis weights over a
    normalized prior.  The truncated posterior is the full one restricted to
    hypotheses free of truncated labels, so the L1 gap is the full-posterior
    mass of hypotheses that carry at least one truncated label.  ``K`` is the
    largest per-label evidence seen in those hypotheses.
    """
    truncated = {c.label for c in full_birth if c.existence < eps}
    enum = enumerate_glmb_posterior(prior, full_birth, z_sets, sensors, motion, p_survival)
    l1 = 0.0
    dropped = []
    for h, psis in enum.terms:
        n_t = len(h.labels & truncated)
        if n_t:
            l1 += h.weight
            dropped.append((h, psis, n_t))
    K = max((max(psis.values()) for _, psis, _ in dropped), default=0.0)
    bound = sum(K ** len(h.labels) * eps ** n_t for h, _, n_t in dropped)
    return BoundCheck(l1, bound, K, len(truncated))


# -- random instances ---------------------------------------------------------------

def random_linear_instance(rng: np.random.Generator, n_sensors: int, sizes: Sequence[int],
                           n_targets: int = 2, spread: float = 60.0, sigma_range=(5.0, 20.0),
                           clutter_rate: float = 2.0, extent: float = 200.0):
    """XY-position sensors observing a few targets near the origin, padded with clutter.

    Returns (sensors, z_sets, Gaussian prior, truth states).
    """
    window = (np.array([-extent, -extent]), np.array([extent, extent]))
    sensors = []
    for _ in range(n_sensors):
        sigma = rng.uniform(*sigma_range)
        sensors.append(LinearGaussianSensor.position(sigma, rng.uniform(0.7, 0.98), clutter_rate, window))
    truth = np.zeros((n_targets, 4))
    truth[:, [0, 2]] = rng.uniform(-spread, spread, size=(n_targets, 2))
    truth[:, [1, 3]] = rng.normal(0.0, 5.0, size=(n_targets, 2))
    z_sets = []
    for sen, m in zip(sensors, sizes):
        zs = [sen.sample_measurement(x, rng) for x in truth[:m]]
        if m > len(zs):
            zs.extend(sen.sample_clutter(rng, m - len(zs)))
        z = np.array(zs).reshape(m, 2)
        z_sets.append(z[rng.permutation(m)])
    prior = GaussianDensity(np.zeros(4), np.diag([100.0 ** 2, 10.0 ** 2, 100.0 ** 2, 10.0 ** 2]))
    return sensors, z_sets, prior, truth


# -- suites shared by the CLI and the acceptance tests -------------------------------

@dataclass
class SuiteResult:
    name: str
    values: list
    threshold: float
    passed: bool
    detail: str = ""


def tv_instance(seed: int):
    """V=3, m=(2,2,2): two nearby targets, random r_A in [0, 0.5)."""
    from msab.gaussian_backend import GaussianBackend

    rng = np.random.default_rng(seed)
    sensors, z_sets, prior, _ = random_linear_instance(rng, 3, (2, 2, 2), n_targets=2, spread=15.0)
    backend = GaussianBackend.from_prior(prior, sensors, z_sets)
    table = AssociationTable.from_vectors([rng.uniform(0.0, 0.5, 2) for _ in range(3)])
    return backend, table


def run_tv_suite(seed: int = 0, n_instances: int = 20, iterations: int = 4000,
                 threshold: float = 0.05) -> SuiteResult:
    from msab.gibbs import GibbsConfig, sample_birth_tuples

    tvs = []
    for i in range(n_instances):
        backend, table = tv_instance(seed * 1000 + i)
        exact = enumerate_exact(backend, table)
        res = sample_birth_tuples(backend, table, GibbsConfig(iterations=iterations, rng_seed=seed * 1000 + i))
        tvs.append(total_variation(exact.entries, res.frequencies()))
    return SuiteResult("tv", tvs, threshold, max(tvs) < threshold,
                       f"max TV {max(tvs):.4f}, mean {np.mean(tvs):.4f} (threshold {threshold})")


def bound_instance(seed: int):
    """Random tiny instance with at least one birth label; returns (prior, birth, eps, z, sensors, motion).

    Birth labels come from the exact tuple distribution of a Gaussian
    backend; ``eps`` is drawn so that some labels are truncated most of the time.
    """
    from msab.core import BernoulliComponent, tuple_to_label
    from msab.gaussian_backend import GaussianBackend

    rng = np.random.default_rng(seed)
    V = int(rng.integers(1, 3))
    sizes = tuple(int(rng.integers(1, 3)) for _ in range(V))
    sensors, z_sets, prior, truth = random_linear_instance(rng, V, sizes, n_targets=2)
    motion = MotionModel.constant_velocity(1.0)
    n_tracks = int(rng.integers(0, 3))
    tracks = {}
    for i in range(n_tracks):
        mean = truth[i % len(truth)] + rng.normal(0.0, 5.0, 4)
        mean[[0, 2]] -= mean[[1, 3]]  # so the prediction lands near the target
        tracks[i] = (float(rng.uniform(0.2, 0.95)), GaussianDensity(mean, np.diag([15.0, 5.0, 15.0, 5.0]) ** 2))
    glmb_prior = TinyGlmb.from_tracks(tracks)
    backend = GaussianBackend.from_prior(prior, sensors, z_sets, motion)
    exact = enumerate_exact(backend, AssociationTable.zeros(backend.sizes))
    cands = [J for J in exact.entries if any(J)]
    order = rng.permutation(len(cands))
    cands = [cands[i] for i in order[:MAX_GLMB_LABELS - n_tracks]]
    mass = sum(exact.prob(J) for J in cands)
    lam = float(rng.uniform(0.3, 1.0))
    comps = tuple(BernoulliComponent(tuple_to_label(J, 1), min(1.0, lam * exact.prob(J) / mass),
                                     backend.birth_spatial(J)) for J in cands)
    birth = LmbDensity(comps)
    r = sorted(c.existence for c in birth)
    eps = float(rng.uniform(r[0], r[-1] * 1.05)) if r else 0.0
    return glmb_prior, birth, eps, z_sets, sensors, motion


def run_bound_suite(seed: int = 0, n_instances: int = 100) -> SuiteResult:
    checks = []
    for i in range(n_instances):
        prior, birth, eps, z, sensors, motion = bound_instance(seed * 1000 + i)
        checks.append(truncation_bound_check(prior, birth, eps, z, sensors, motion))
    violations = sum(not c.holds for c in checks)
    truncating = sum(c.n_truncated_labels > 0 for c in checks)
    return SuiteResult("bound", checks, 0.0, violations == 0,
                       f"{violations} violations over {n_instances} instances "
                       f"({truncating} with truncated labels)")


def xcheck_instance(seed: int, n_particles: int = 10_000):
    """Gaussian and Monte Carlo backends on the same linear instance, plus a reference tuple."""
    from msab.gaussian_backend import GaussianBackend
    from msab.mc_backend import BirthPrior, MonteCarloBackend

    rng = np.random.default_rng(seed)
    V = int(rng.integers(2, 4))
    sizes = tuple(int(rng.integers(1, 4)) for _ in range(V))
    sensors, z_sets, prior, _ = random_linear_instance(rng, V, sizes, n_targets=2, spread=40.0)
    gb = GaussianBackend.from_prior(prior, sensors, z_sets)
    pos, vel = [0, 2], [1, 3]
    mc_prior = BirthPrior(GaussianDensity(prior.mean[pos], prior.cov[np.ix_(pos, pos)]),
                          GaussianDensity(prior.mean[vel], prior.cov[np.ix_(vel, vel)]))
    mc = MonteCarloBackend(sensors, z_sets, mc_prior, n_particles, rng=np.random.default_rng(seed + 1))
    table = AssociationTable.from_vectors([rng.uniform(0.0, 0.3, m) for m in sizes])
    # reference tuple drawn from the exact distribution, i.e. a state the sampler visits
    exact = enumerate_exact(gb, table)
    keys = list(exact.entries)
    J = keys[int(rng.choice(len(keys), p=np.array([exact.entries[k] for k in keys])))]
    return gb, mc, table, J


def run_backend_xcheck(seed: int = 0, n_instances: int = 20, n_particles: int = 10_000,
                       threshold: float = 0.02) -> SuiteResult:
    tvs = []
    for i in range(n_instances):
        gb, mc, table, J = xcheck_instance(seed * 1000 + i, n_particles)
        per_sensor = []
        for s in range(len(J)):
            wg = gb.conditional_weights(s, J, table)
            wm = mc.conditional_weights(s, J, table)
            per_sensor.append(0.5 * np.abs(wg / wg.sum() - wm / wm.sum()).sum())
        tvs.append(float(np.mean(per_sensor)))
    return SuiteResult("backend-xcheck", tvs, threshold, max(tvs) < threshold,
                       f"max sensor-averaged TV {max(tvs):.4f}, mean {np.mean(tvs):.4f} (threshold {threshold})")
