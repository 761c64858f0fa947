import numpy as np
import pytest

from msab.association import (
    AssociationTable,
    lmb_association_probs,
    marginal_association,
    unassociation_prob,
)
from msab.core import BernoulliComponent, BirthLabel, GaussianDensity, LinearGaussianSensor, LmbDensity

from conftest import WINDOW


def track(label, x, y, r=0.99, sigma=5.0):
    cov = np.diag([sigma ** 2, 1.0, sigma ** 2, 1.0])
    return BernoulliComponent(BirthLabel(0, (label,)), r, GaussianDensity(np.array([x, 0.0, y, 0.0]), cov))


def test_table_index_zero_is_zero():
    t = AssociationTable.from_vectors([[0.3, 1.0], []])
    assert t.per_sensor[0][0] == 0.0 and t.per_sensor[1].tolist() == [0.0]
    assert t.sizes == (2, 0)
    assert t.r_a(0, 2) < 1.0  # clipped below one


def test_unassociation_all_zero_table():
    assert unassociation_prob((2, 1), AssociationTable.zeros((2, 3))) == 1.0


def test_unassociation_all_missed():
    t = AssociationTable.from_vectors([[0.9], [0.8]])
    assert unassociation_prob((0, 0), t) == 1.0


def test_unassociation_product():
    t = AssociationTable.from_vectors([[0.5], [0.2]])
    assert unassociation_prob((1, 1), t) == pytest.approx(0.4, abs=1e-15)


def test_unassociation_checks_shape():
    t = AssociationTable.zeros((1, 1))
    with pytest.raises(ValueError):
        unassociation_prob((0,), t)
    with pytest.raises(IndexError):
        unassociation_prob((0, 2), t)


def test_empty_prior_gives_zeros(position_sensor):
    out = lmb_association_probs(LmbDensity(), np.zeros((3, 2)), position_sensor)
    assert out.tolist() == [0.0, 0.0, 0.0]


def test_single_track_on_first_measurement():
    sen = LinearGaussianSensor.position(10.0, 0.95, 0.5, WINDOW)
    z = np.array([[10.0, 20.0], [400.0, -400.0]])
    prior = LmbDensity((track(1, 10.0, 20.0),))
    r_a = lmb_association_probs(prior, z, sen)
    # single-track Bayes weights by hand: missed 1 - r pD, detect r pD q_j / kappa_j
    r, pd = 0.99, 0.95
    S = 25.0 + 100.0
    q = [np.exp(-0.5 * np.sum((zj - [10.0, 20.0]) ** 2) / S) / (2 * np.pi * S) for zj in z]
    kappa = 0.5 / 1e6
    d = [r * pd * qj / kappa for qj in q]
    expected = np.array(d) / (1 - r * pd + sum(d))
    np.testing.assert_allclose(r_a, expected, rtol=1e-9)
    assert r_a[0] > 0.99 and r_a[1] < 1e-6


def test_huge_clutter_suppresses_association():
    sen = LinearGaussianSensor.position(10.0, 0.95, 1e12, WINDOW)
    prior = LmbDensity((track(1, 0.0, 0.0),))
    assert lmb_association_probs(prior, np.array([[0.0, 0.0]]), sen).max() < 1e-4


def test_loopy_bp_exact_for_two_by_two():
    missed = np.array([0.3, 0.5])
    detect = np.array([[2.0, 0.5], [1.0, 3.0]])
    beta = marginal_association(missed, detect)
    # brute force over the joint association (each measurement used at most once)
    psi = detect / missed[:, None]
    hyps = {(0, 0): 1.0, (1, 0): psi[0, 0], (2, 0): psi[0, 1], (0, 1): psi[1, 0], (0, 2): psi[1, 1],
            (1, 2): psi[0, 0] * psi[1, 1], (2, 1): psi[0, 1] * psi[1, 0]}
    Z = sum(hyps.values())
    exact = np.zeros((2, 3))
    for (a, b), w in hyps.items():
        exact[0, a] += w / Z
        exact[1, b] += w / Z
    # loopy BP on a 2x2 graph is an approximation, but a close one
    np.testing.assert_allclose(beta, exact, atol=0.05)
    np.testing.assert_allclose(beta.sum(axis=1), 1.0)
