import itertools
import math

import numpy as np
import pytest

from msab.association import AssociationTable
from msab.core import BernoulliComponent, BirthLabel, GaussianDensity, LinearGaussianSensor, LmbDensity, MotionModel
from msab.gaussian_backend import GaussianBackend
from msab.oracle import (
    ExactTupleDistribution,
    OracleSizeError,
    TinyGlmb,
    bound_instance,
    enumerate_exact,
    epsilon_truncation,
    kalman_condition,
    psi_bar_quadrature,
    random_linear_instance,
    truncation_bound_check,
    tiny_glmb_update,
    total_variation,
    tv_instance,
)

from conftest import WINDOW

STILL = MotionModel(np.eye(4), np.zeros((4, 4)))


class FlatBackend:
    def __init__(self, sizes):
        self.sizes = tuple(sizes)

    def log_psi_bar(self, J):
        return 0.0


def test_two_by_two_space():
    d = enumerate_exact(FlatBackend((1, 1)), AssociationTable.zeros((1, 1)))
    assert len(d.entries) == 4
    assert sum(d.entries.values()) == pytest.approx(1.0, abs=1e-12)


def test_flat_evidence_gives_uniform():
    d = enumerate_exact(FlatBackend((2, 1)), AssociationTable.zeros((2, 1)))
    assert all(p == pytest.approx(1 / 6) for p in d.entries.values())


def test_size_limit():
    with pytest.raises(OracleSizeError):
        enumerate_exact(FlatBackend((9,) * 7), AssociationTable.zeros((9,) * 7))


def test_distribution_must_sum_to_one():
    with pytest.raises(ValueError):
        ExactTupleDistribution({(0,): 0.3, (1,): 0.3}, 0.0)


def test_exact_conditionals_match_backend_weights():
    backend, table = tv_instance(2)
    d = enumerate_exact(backend, table)
    for J in [(0, 0, 0), (1, 2, 0), (2, 1, 1)]:
        for s in range(3):
            w = backend.conditional_weights(s, J, table)
            np.testing.assert_allclose(d.conditional(s, J), w / w.sum(), atol=1e-9)


def test_total_variation_basics():
    assert total_variation({"a": 1.0}, {"a": 1.0}) == 0.0
    assert total_variation({"a": 1.0}, {"b": 1.0}) == 1.0


def test_epsilon_truncation_edges():
    r = {"a": 0.1, "b": 0.4, "c": 0.0}
    assert epsilon_truncation(r, 0.0) == {"a", "b", "c"}
    assert epsilon_truncation(r, 0.5) == set()
    g = GaussianDensity(np.zeros(2), np.eye(2))
    lmb = LmbDensity((BernoulliComponent(BirthLabel(1, (1,)), 0.3, g),))
    assert epsilon_truncation(lmb, 0.2) == {BirthLabel(1, (1,))}


def test_median_truncation_recovered_from_sampled_set():
    from msab.gibbs import GibbsConfig, sample_birth_tuples

    backend, table = tv_instance(4)
    exact = enumerate_exact(backend, table)
    eps = float(np.median(list(exact.entries.values())))
    direct = epsilon_truncation(exact.entries, eps)
    sampled = sample_birth_tuples(backend, table, GibbsConfig(iterations=4000, rng_seed=1)).tuples
    # threshold the exact values of the sampled tuples
    assert epsilon_truncation({J: exact.entries[J] for J in sampled}, eps) == direct


def test_kalman_route_matches_information_route():
    rng = np.random.default_rng(0)
    sensors, z_sets, prior, _ = random_linear_instance(rng, 3, (2, 2, 2))
    gb = GaussianBackend.from_prior(prior, sensors, z_sets)
    post, _ = kalman_condition(prior, (1, 0, 2), z_sets, sensors)
    ref = gb.posterior((1, 0, 2))
    np.testing.assert_allclose(post.mean, ref.mean, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(post.cov, ref.cov, rtol=1e-7, atol=1e-9)


def test_quadrature_rejects_4d():
    rng = np.random.default_rng(0)
    sensors, z_sets, prior, _ = random_linear_instance(rng, 1, (1,))
    with pytest.raises(ValueError):
        psi_bar_quadrature(prior, (1,), z_sets, sensors)


# -- tiny GLMB -------------------------------------------------------------------

def tight(x, y, sigma=5.0):
    return GaussianDensity(np.array([x, 0.0, y, 0.0]), np.diag([sigma ** 2, 1.0, sigma ** 2, 1.0]))


def test_no_measurements_no_birth_keeps_prediction():
    sen = LinearGaussianSensor.position(10.0, 0.9, 2.0, WINDOW)
    prior = TinyGlmb.from_tracks({"a": (0.6, tight(0, 0))})
    post = tiny_glmb_update(prior, LmbDensity(), [np.zeros((0, 2))], [sen], STILL, p_survival=0.9)
    # the only association is "missed", which scales the surviving hypothesis by 1 - pD
    w_keep = 0.6 * 0.9 * 0.1
    w_gone = 0.4 + 0.6 * 0.1
    assert post.existence("a") == pytest.approx(w_keep / (w_keep + w_gone))


def test_measurement_on_track_two_hypothesis_odds():
    sen = LinearGaussianSensor.position(10.0, 0.9, 2.0, WINDOW)
    prior = TinyGlmb.from_tracks({"a": (1.0, tight(0, 0))})
    z = np.array([[0.0, 0.0]])
    post = tiny_glmb_update(prior, LmbDensity(), [z], [sen], STILL, p_survival=1.0)
    weights = {h.tuple_of("a"): h.weight for h in post.hypotheses}
    S = 25.0 + 100.0
    q = 1.0 / (2 * math.pi * S)
    kappa = 2.0 / 1e6
    odds = 0.9 * q / kappa / 0.1
    assert weights[(1,)] / weights[(0,)] == pytest.approx(odds, rel=1e-9)
    assert weights[(1,)] > 0.99


def test_symmetric_ambiguity_equal_weights():
    sen = LinearGaussianSensor.position(10.0, 0.9, 2.0, WINDOW)
    prior = TinyGlmb.from_tracks({"a": (1.0, tight(0, 0, 30.0))})
    z = np.array([[10.0, 0.0], [-10.0, 0.0]])
    post = tiny_glmb_update(prior, LmbDensity(), [z], [sen], STILL, p_survival=1.0)
    w = {h.tuple_of("a"): h.weight for h in post.hypotheses}
    assert w[(1,)] == pytest.approx(w[(2,)], rel=1e-12)


def test_glmb_size_limit():
    sen = LinearGaussianSensor.position(10.0, 0.9, 2.0, WINDOW)
    prior = TinyGlmb.from_tracks({i: (0.5, tight(i, 0)) for i in range(5)})
    with pytest.raises(OracleSizeError):
        tiny_glmb_update(prior, LmbDensity(), [np.zeros((1, 2))], [sen], STILL)


def test_cardinality_pmf_sums_to_one():
    prior = TinyGlmb.from_tracks({"a": (0.3, tight(0, 0)), "b": (0.8, tight(5, 5))})
    pmf = prior.cardinality_pmf()
    assert pmf.sum() == pytest.approx(1.0)
    assert pmf[2] == pytest.approx(0.24)


def test_bound_without_truncation_is_zero():
    prior, birth, _, z, sensors, motion = bound_instance(3)
    chk = truncation_bound_check(prior, birth, 0.0, z, sensors, motion)
    assert chk.l1_distance == 0.0 and chk.bound == 0.0 and chk.n_truncated_labels == 0


def test_bound_with_everything_truncated():
    prior, birth, _, z, sensors, motion = bound_instance(5)
    eps = max(birth.existence) * 1.01
    chk = truncation_bound_check(prior, birth, eps, z, sensors, motion)
    assert chk.n_truncated_labels == len(birth)
    assert chk.l1_distance > 0 and chk.holds


@pytest.mark.parametrize("seed", range(6))
def test_bound_monotone_in_epsilon(seed):
    prior, birth, eps, z, sensors, motion = bound_instance(seed)
    hi = truncation_bound_check(prior, birth, eps, z, sensors, motion)
    lo = truncation_bound_check(prior, birth, eps / 2, z, sensors, motion)
    assert lo.l1_distance <= hi.l1_distance + 1e-15
    assert lo.bound <= hi.bound + 1e-15
    assert lo.holds and hi.holds
