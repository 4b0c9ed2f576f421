from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from advlinreg.adversarial import (
    AdvConfig,
    GeneralLossKind,
    adv_loss_general,
    adv_risk,
    adv_risk_linmap,
    adv_risk_per_sample,
    adv_risk_sampled,
    adv_test_mse,
    base_loss,
    general_worst_case_perturbation,
    robust_colset_worst_case,
    robust_colset_worst_value,
    robust_rowset_worst_value,
    worst_case_perturbations,
)
from advlinreg.norms import Dataset, NormKind, norm

from conftest import random_dataset


def test_zero_beta_gives_mean_square_of_targets(rng):
    D = random_dataset(rng, 5, 3)
    for attack in ("l2", "linf"):
        assert adv_risk(np.zeros(3), D, AdvConfig(0.7, attack)) == pytest.approx(np.mean(D.y**2))
        assert adv_risk_sampled(np.zeros(3), D, AdvConfig(0.7, attack), samples=5) == pytest.approx(np.mean(D.y**2))


def test_hand_evaluated_risk():
    D = Dataset(np.array([[1.0, 1.0]]), np.array([0.0]))
    assert adv_risk([1.0, 0.0], D, AdvConfig(0.5, "linf")) == pytest.approx(2.25)


def test_zero_radius_is_mse(rng):
    D = random_dataset(rng, 6, 4)
    b = rng.standard_normal(4)
    assert adv_risk(b, D, AdvConfig(0.0)) == pytest.approx(D.mse(b))
    np.testing.assert_array_equal(worst_case_perturbations(b, D, AdvConfig(0.0)), 0.0)


def test_worst_case_directions():
    D = Dataset(np.zeros((1, 2)), np.array([1.0]))
    np.testing.assert_allclose(worst_case_perturbations([1.0, -2.0], D, AdvConfig(1.0, "linf")), [[-1.0, 1.0]])
    np.testing.assert_allclose(worst_case_perturbations([3.0, 4.0], D, AdvConfig(1.0, "l2")), [[-0.6, -0.8]])


def test_sampled_needs_samples(rng):
    D = random_dataset(rng, 2, 2)
    with pytest.raises(ValueError):
        adv_risk_sampled(np.ones(2), D, AdvConfig(0.1), samples=0)


def test_negative_radius_rejected():
    with pytest.raises(ValueError):
        AdvConfig(-1.0)


@given(st.integers(1, 5), st.integers(1, 6), st.floats(0.0, 2.0), st.sampled_from(["l2", "linf"]), st.integers(0, 2**31))
def test_closed_form_matches_constructed_attack_and_bounds_samples(n, p, delta, attack, seed):
    rng = np.random.default_rng(seed)
    D = random_dataset(rng, n, p)
    b = rng.standard_normal(p)
    cfg = AdvConfig(delta, attack)
    closed = adv_risk(b, D, cfg)
    W = worst_case_perturbations(b, D, cfg)
    for w in W:
        assert norm(w, attack) <= delta * (1 + 1e-12) + 1e-15
    primal = np.mean((D.y - np.einsum("ij,j->i", D.X + W, b)) ** 2)
    assert primal == pytest.approx(closed, rel=1e-9)
    assert adv_risk_sampled(b, D, cfg, samples=32, seed=seed, include_worst_case=False) <= closed * (1 + 1e-12)
    assert adv_risk_sampled(b, D, cfg, samples=4, seed=seed) == pytest.approx(closed, rel=1e-9)


def test_risk_is_convex_along_segments(rng):
    D = random_dataset(rng, 6, 5)
    for attack in ("l2", "linf"):
        cfg = AdvConfig(0.3, attack)
        for _ in range(20):
            a, b = rng.standard_normal(5), rng.standard_normal(5)
            t = rng.uniform()
            assert adv_risk(t * a + (1 - t) * b, D, cfg) <= t * adv_risk(a, D, cfg) + (1 - t) * adv_risk(b, D, cfg) + 1e-12


def test_per_sample_averages_to_risk(rng):
    D = random_dataset(rng, 7, 3)
    b = rng.standard_normal(3)
    cfg = AdvConfig(0.2, "l2")
    assert adv_risk_per_sample(b, D, cfg).mean() == pytest.approx(adv_risk(b, D, cfg))


def test_general_loss_examples():
    assert adv_loss_general(0.5, 1.0, 0.2, GeneralLossKind.Hinge) == pytest.approx(0.7)
    assert adv_loss_general(0.3, 1.0, 0.0, GeneralLossKind.SquaredRegression) == pytest.approx(0.49)
    assert adv_loss_general(0.0, -1.0, 0.0, GeneralLossKind.Logistic) == pytest.approx(np.log(2))
    with pytest.raises(ValueError):
        adv_loss_general(0.0, 0.5, 0.0, GeneralLossKind.Hinge)


@given(st.sampled_from(list(GeneralLossKind)), st.sampled_from(["l2", "linf"]), st.integers(1, 6), st.integers(0, 2**31))
def test_general_loss_constructed_maximiser(kind, attack, p, seed):
    rng = np.random.default_rng(seed)
    x, b = rng.standard_normal(p), rng.standard_normal(p)
    y = float(rng.choice([-1.0, 1.0])) if kind.is_classification else float(rng.standard_normal())
    cfg = AdvConfig(float(rng.uniform(0, 1)), attack)
    closed = adv_loss_general(float(x @ b), y, cfg.delta * norm(b, cfg.regularizer), kind)
    dx = general_worst_case_perturbation(x, b, y, cfg, kind)
    assert norm(dx, attack) <= cfg.delta * (1 + 1e-12) + 1e-15
    assert float(base_loss((x + dx) @ b, kind, y)) == pytest.approx(closed, rel=1e-9, abs=1e-12)
    # random points of the ball never do better
    for _ in range(10):
        u = rng.uniform(-1, 1, p)
        u *= cfg.delta / max(norm(u, attack), 1e-300)
        assert float(base_loss((x + u) @ b, kind, y)) <= closed + 1e-9 * max(1.0, abs(closed))


def test_colset_examples(rng):
    D = random_dataset(rng, 4, 3)
    assert robust_colset_worst_value(np.zeros(3), D, 1.0) == pytest.approx(np.linalg.norm(D.y))
    b = rng.standard_normal(3)
    assert robust_colset_worst_value(b, D, 0.0) == pytest.approx(np.linalg.norm(D.y - D.X @ b))


@given(st.integers(1, 6), st.integers(1, 6), st.one_of(st.just(0.0), st.floats(1e-6, 3.0)), st.integers(0, 2**31))
def test_colset_construction(n, p, delta, seed):
    rng = np.random.default_rng(seed)
    D = random_dataset(rng, n, p)
    b = rng.standard_normal(p)
    Delta = robust_colset_worst_case(b, D, delta)
    assert np.all(np.linalg.norm(Delta, axis=0) <= delta * (1 + 1e-12))
    direct = np.linalg.norm(D.y - (D.X + Delta) @ b)
    assert direct == pytest.approx(robust_colset_worst_value(b, D, delta), rel=1e-9)


def test_rowset_matches_sqrt_of_n_times_risk(rng):
    D = random_dataset(rng, 5, 4)
    b = rng.standard_normal(4)
    for attack in ("l2", "linf"):
        cfg = AdvConfig(0.4, attack)
        # rows attacked independently: the l2 norm of the worst residual vector
        assert robust_rowset_worst_value(b, D, cfg) == pytest.approx(np.sqrt(D.n * adv_risk(b, D, cfg)), rel=1e-12)


def test_adv_test_mse_examples(rng):
    T = random_dataset(rng, 9, 3)
    b = rng.standard_normal(3)
    assert adv_test_mse(b, T, AdvConfig(0.0)) == pytest.approx(T.mse(b))
    assert adv_test_mse(np.zeros(3), T, AdvConfig(1.0)) == pytest.approx(np.mean(T.y**2))
    row = Dataset(T.X[:1], T.y[:1])
    cfg = AdvConfig(0.3, "l2")
    assert adv_test_mse(b, row, cfg) == pytest.approx((abs(T.y[0] - T.X[0] @ b) + 0.3 * np.linalg.norm(b)) ** 2)
    with pytest.raises(ValueError):
        adv_test_mse(np.zeros(2), T, cfg)


def test_linmap_with_identity_matches_plain(rng):
    D = random_dataset(rng, 5, 4)
    b = rng.standard_normal(4)
    cfg = AdvConfig(0.3, "linf")
    assert adv_risk_linmap(b, D, np.eye(4), cfg) == pytest.approx(adv_risk(b, D, cfg))
