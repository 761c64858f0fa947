import math

import numpy as np
import pytest

from msab.association import AssociationTable
from msab.core import BearingRangeSensor, GaussianDensity, LinearGaussianSensor, MotionModel
from msab.gaussian_backend import GaussianBackend
from msab.mc_backend import (
    BirthPrior,
    MonteCarloBackend,
    ProposalDraw,
    UniformBox,
    birth_spatial_mc,
    psi_bar_mc,
    systematic_resample,
)
from msab.oracle import random_linear_instance

from conftest import WINDOW


def split_prior(prior: GaussianDensity) -> BirthPrior:
    pos, vel = [0, 2], [1, 3]
    return BirthPrior(GaussianDensity(prior.mean[pos], prior.cov[pos][:, pos]),
                      GaussianDensity(prior.mean[vel], prior.cov[vel][:, vel]))


def linear_pair(seed, n_particles=10 ** 5):
    rng = np.random.default_rng(seed)
    sensors, z_sets, prior, _ = random_linear_instance(rng, 2, (2, 2), spread=10.0)
    gb = GaussianBackend.from_prior(prior, sensors, z_sets)
    mc = MonteCarloBackend(sensors, z_sets, split_prior(prior), n_particles, rng=np.random.default_rng(seed))
    return gb, mc, sensors, z_sets, prior


def test_birth_prior_partitions_state():
    bp = BirthPrior(UniformBox(np.zeros(2), np.ones(2)), GaussianDensity(np.zeros(2), np.eye(2)))
    assert sorted(bp.observable_dims + bp.unobservable_dims) == [0, 1, 2, 3]
    with pytest.raises(ValueError):
        BirthPrior(UniformBox(np.zeros(2), np.ones(2)), GaussianDensity(np.zeros(3), np.eye(3)))


def test_proposal_needs_detected_anchor():
    _, mc, *_ = linear_pair(0, 100)
    with pytest.raises(ValueError):
        mc.draw_proposal((0, 0))
    with pytest.raises(ValueError):
        mc.draw_proposal((1, 0), anchor=1)


def test_tight_sensor_concentrates_samples():
    sen = LinearGaussianSensor.position(1e-3, 0.9, 1.0, WINDOW)
    prior = BirthPrior(UniformBox(np.full(2, -500.0), np.full(2, 500.0)), GaussianDensity(np.zeros(2), np.eye(2)))
    z = np.array([[12.0, -40.0]])
    mc = MonteCarloBackend([sen], [z], prior, 2000, rng=np.random.default_rng(0))
    draw = mc.draw_proposal((1,))
    np.testing.assert_allclose(draw.states[:, [0, 2]], np.repeat(z, 2000, axis=0), atol=0.01)


def test_uniform_prior_volume_cancels_in_normalized_weights():
    sen = LinearGaussianSensor.position(5.0, 0.9, 1.0, WINDOW)
    z = [np.array([[0.0, 0.0], [3.0, 1.0]]), np.array([[1.0, 1.0]])]
    vel = GaussianDensity(np.zeros(2), np.eye(2))
    out = []
    for half in (500.0, 5000.0):
        prior = BirthPrior(UniformBox(np.full(2, -half), np.full(2, half)), vel)
        mc = MonteCarloBackend([sen, sen], z, prior, 500, rng=np.random.default_rng(3))
        w = mc.conditional_weights(0, (0, 1), AssociationTable.zeros((2, 1)))
        out.append(w[1:] / w[1:].sum())
    np.testing.assert_allclose(out[0], out[1], rtol=1e-9)


def test_constant_weights_estimate_is_exact():
    draw = ProposalDraw(0, np.zeros((10, 4)), np.full(10, math.log(0.37)))
    assert psi_bar_mc(draw) == pytest.approx(0.37, rel=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_mc_evidence_within_three_standard_errors(seed):
    gb, mc, *_ = linear_pair(seed)
    for J in [(1, 0), (1, 1), (2, 2), (0, 1)]:
        draw = mc.draw_proposal(J)
        w = np.exp(draw.log_weights)
        se = w.std() / math.sqrt(w.size)
        assert abs(w.mean() - gb.psi_bar(J)) < 3 * se + 1e-300


def test_inconsistent_tuple_has_tiny_evidence():
    sen = LinearGaussianSensor.position(5.0, 0.9, 1.0, WINDOW)
    prior = BirthPrior(UniformBox(np.full(2, -500.0), np.full(2, 500.0)), GaussianDensity(np.zeros(2), np.eye(2)))
    z = [np.array([[0.0, 0.0]]), np.array([[2.0, 3.0], [300.0, -300.0]])]
    mc = MonteCarloBackend([sen, sen], z, prior, 10 ** 4, rng=np.random.default_rng(0))
    assert psi_bar_mc(mc.draw_proposal((1, 2))) < 1e-3 * psi_bar_mc(mc.draw_proposal((1, 1)))


def test_single_sensor_weights_follow_evidence():
    gb, mc, *_ = linear_pair(4, 10 ** 4)
    table = AssociationTable.zeros(mc.sizes)
    w = mc.conditional_weights(0, (0, 0), table)
    ref = np.array([gb.psi_bar((j, 0)) for j in range(3)])
    np.testing.assert_allclose(w / w.sum(), ref / ref.sum(), atol=0.02)


def test_mc_weights_match_gaussian_backend():
    gb, mc, *_ = linear_pair(5, 10 ** 4)
    table = AssociationTable.from_vectors([[0.1, 0.2], [0.0, 0.3]])
    for s, J in [(0, (0, 1)), (1, (2, 0)), (1, (1, 2))]:
        wg = gb.conditional_weights(s, J, table)
        wm = mc.conditional_weights(s, J, table)
        assert 0.5 * np.abs(wg / wg.sum() - wm / wm.sum()).sum() < 0.02


def test_mc_fully_associated_weight_is_zero():
    _, mc, *_ = linear_pair(6, 1000)
    table = AssociationTable((np.array([0.0, 1.0, 0.0]), np.zeros(3)))
    assert mc.conditional_weights(0, (0, 1), table)[1] == 0.0


def test_birth_spatial_moments_match_closed_form():
    gb, mc, sensors, z_sets, prior = linear_pair(7, 10 ** 5)
    still = MotionModel(np.eye(4), np.zeros((4, 4)))
    J = (1, 1)
    post = gb.posterior(J)
    parts = birth_spatial_mc(mc, J, still)
    se = np.sqrt(np.diag(post.cov) / len(parts))
    assert np.all(np.abs(parts.mean - post.mean) < 4 * se + 1e-9)
    np.testing.assert_allclose(np.diag(parts.cov), np.diag(post.cov), rtol=0.05)


def test_large_process_noise_inflates_covariance():
    _, mc, *_ = linear_pair(8, 2 * 10 ** 4)
    Q = np.diag([400.0, 4.0, 400.0, 4.0]) * 100
    a = birth_spatial_mc(mc, (1, 1), MotionModel(np.eye(4), np.zeros((4, 4))))
    b = birth_spatial_mc(mc, (1, 1), MotionModel(np.eye(4), Q))
    np.testing.assert_allclose(np.diag(b.cov) - np.diag(a.cov), np.diag(Q), rtol=0.1)


def test_systematic_resample_equal_weights_is_permutation(rng):
    idx = systematic_resample(np.full(50, 0.02), rng)
    assert sorted(idx.tolist()) == list(range(50))


def test_systematic_resample_counts_within_one(rng):
    w = rng.random(20)
    idx = systematic_resample(w, rng, 1000)
    counts = np.bincount(idx, minlength=20)
    assert np.all(np.abs(counts - 1000 * w / w.sum()) <= 1.0 + 1e-9)


def test_bearing_sensor_backend_runs():
    sen = BearingRangeSensor([0.0, -1000.0], np.diag([math.radians(0.25) ** 2, 100.0]), 0.9, 5.0, 5000.0)
    x = np.array([100.0, 0.0, 200.0, 0.0])
    z = sen.h(x)
    prior = BirthPrior(UniformBox(np.full(2, -2000.0), np.full(2, 2000.0)), GaussianDensity(np.zeros(2), 100 * np.eye(2)))
    mc = MonteCarloBackend([sen, sen], [z, z], prior, 2000, rng=np.random.default_rng(0))
    parts = birth_spatial_mc(mc, (1, 1), MotionModel(np.eye(4), np.zeros((4, 4))))
    assert np.linalg.norm(parts.mean[[0, 2]] - x[[0, 2]]) < 10.0
