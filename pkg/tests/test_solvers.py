from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advlinreg.adversarial import AdvConfig
from advlinreg.norms import Dataset, NormKind, norm
from advlinreg.solvers import (
    RankDeficientError,
    adv_objective,
    dual_certificate_linmap,
    lasso_kkt_residual,
    lasso_objective,
    min_l1_from_lp,
    min_norm_interpolator,
    min_norm_interpolator_linmap,
    min_norm_selection,
    optimality_residual,
    solve_adv,
    solve_adv_linmap,
    solve_dual_certificate,
    solve_lasso,
    solve_ridge,
    solve_sqrt_lasso,
    sqrt_lasso_objective,
)
from advlinreg.theory import zero_threshold

from conftest import random_dataset

ONE_POINT = Dataset(np.array([[1.0, 0.0]]), np.array([1.0]))


# --- adversarial training ---------------------------------------------------


def test_single_point_interpolates_then_vanishes():
    lo = solve_adv(ONE_POINT, AdvConfig(0.5, "l2"))
    np.testing.assert_allclose(lo.beta, [1.0, 0.0], atol=1e-8)
    assert lo.converged
    hi = solve_adv(ONE_POINT, AdvConfig(1.5, "l2"))
    np.testing.assert_allclose(hi.beta, [0.0, 0.0], atol=1e-10)


@pytest.mark.parametrize("attack", ["l2", "linf"])
def test_radius_above_zero_threshold_gives_zero(rng, attack):
    for _ in range(3):
        D = random_dataset(rng, 6, 9)
        res = solve_adv(D, AdvConfig(1.2 * zero_threshold(D, attack), attack))
        assert norm(res.beta, "l2") <= 1e-9
        assert res.converged


def test_zero_radius_is_least_squares(rng):
    D = random_dataset(rng, 10, 3)
    res = solve_adv(D, AdvConfig(0.0, "linf"))
    np.testing.assert_allclose(res.beta, np.linalg.lstsq(D.X, D.y, rcond=None)[0], atol=1e-10)


def test_l1_attack_is_rejected(rng):
    with pytest.raises(ValueError):
        solve_adv(random_dataset(rng, 3, 3), AdvConfig(0.1, "l1"))


@settings(max_examples=15)
@given(st.integers(2, 10), st.integers(1, 14), st.floats(0.005, 1.0), st.sampled_from(["l2", "linf"]), st.integers(0, 2**31))
def test_solve_adv_is_certified_and_locally_optimal(n, p, delta, attack, seed):
    rng = np.random.default_rng(seed)
    D = random_dataset(rng, n, p)
    cfg = AdvConfig(delta, attack)
    res = solve_adv(D, cfg)
    assert res.converged
    assert optimality_residual(res.beta, D, cfg) <= 1e-6
    f0 = adv_objective(res.beta, D.X, D.y, None, cfg)
    assert res.objective_value == pytest.approx(f0, rel=1e-12)
    for _ in range(30):
        b = res.beta + 10.0 ** rng.uniform(-6, -1) * rng.standard_normal(p)
        assert adv_objective(b, D.X, D.y, None, cfg) >= f0 - 1e-10 * max(1.0, f0)


def test_linmap_identity_matches_plain(rng):
    D = random_dataset(rng, 6, 8)
    for attack in ("l2", "linf"):
        cfg = AdvConfig(0.2, attack)
        a = solve_adv(D, cfg).beta
        b = solve_adv_linmap(D, np.eye(8), cfg).beta
        np.testing.assert_allclose(a, b, atol=1e-6)


def test_linmap_zero_radius_is_least_squares_in_theta(rng):
    D = random_dataset(rng, 12, 6)
    S = rng.choice([-1.0, 1.0], size=(3, 6))
    res = solve_adv_linmap(D, S, AdvConfig(0.0))
    ref = np.linalg.lstsq(D.X @ S.T, D.y, rcond=None)[0]
    np.testing.assert_allclose(res.beta, ref, atol=1e-9)


@pytest.mark.parametrize("attack", ["l2", "linf"])
def test_linmap_rademacher_local_optimality(rng, attack):
    D = random_dataset(rng, 6, 12)
    S = rng.choice([-1.0, 1.0], size=(8, 12))
    cfg = AdvConfig(0.05, attack)
    res = solve_adv_linmap(D, S, cfg)
    assert res.converged
    Z = D.X @ S.T
    f0 = adv_objective(res.beta, Z, D.y, S.T, cfg)
    for _ in range(50):
        th = res.beta + 1e-3 * rng.standard_normal(8)
        assert adv_objective(th, Z, D.y, S.T, cfg) >= f0 - 1e-12


# --- certificate ------------------------------------------------------------


def test_certificate_at_zero_above_and_below_threshold(rng):
    D = random_dataset(rng, 5, 7)
    for attack in ("l2", "linf"):
        zt = zero_threshold(D, attack)
        assert optimality_residual(np.zeros(7), D, AdvConfig(zt, attack)) <= 1e-10
        assert optimality_residual(np.zeros(7), D, AdvConfig(1.3 * zt, attack)) <= 1e-10
        d = 0.5 * zt
        lower = (norm(D.X.T @ D.y, attack) - d * np.abs(D.y).sum()) * 2 / D.n
        assert optimality_residual(np.zeros(7), D, AdvConfig(d, attack)) >= lower * (1 - 1e-9)


def test_min_norm_selection_cases():
    a = np.array([3.0, -0.5])
    # box column can absorb at most one unit along e1
    assert min_norm_selection(a, box_cols=np.array([[1.0], [0.0]])) == pytest.approx(np.hypot(2.0, 0.5))
    assert min_norm_selection(a) == pytest.approx(np.linalg.norm(a))
    assert min_norm_selection(a, ball_cols=np.eye(2) * 10) == pytest.approx(0.0, abs=1e-12)


# --- ridge / lasso / sqrt-lasso --------------------------------------------


def test_ridge_examples(rng):
    D = Dataset(np.eye(2), np.array([2.0, 2.0]))
    np.testing.assert_allclose(solve_ridge(D, 1.0).beta, [2 / 3, 2 / 3])
    R = random_dataset(rng, 5, 12)
    assert norm(solve_ridge(R, 1e8).beta, "l2") < 1e-6
    mn = min_norm_interpolator(R, "l2").beta
    np.testing.assert_allclose(solve_ridge(R, 1e-8).beta, mn, rtol=1e-4, atol=1e-6)
    with pytest.raises(ValueError):
        solve_ridge(R, 0.0)


def test_lasso_examples(rng):
    D = Dataset(np.eye(2), np.array([2.0, 2.0]))
    np.testing.assert_allclose(solve_lasso(D, 1.0).beta, [1.0, 1.0], atol=1e-10)
    R = random_dataset(rng, 8, 5)
    lmax = 2 * np.abs(R.X.T @ R.y).max() / R.n
    np.testing.assert_array_equal(solve_lasso(R, lmax).beta, 0.0)
    Q = random_dataset(rng, 4, 4)
    np.testing.assert_allclose(solve_lasso(Q, 0.0).beta, np.linalg.solve(Q.X, Q.y), atol=1e-7)


@settings(max_examples=20)
@given(st.integers(2, 10), st.integers(1, 20), st.floats(1e-4, 1.0), st.integers(0, 2**31))
def test_lasso_certified(n, p, lam, seed):
    rng = np.random.default_rng(seed)
    D = random_dataset(rng, n, p)
    res = solve_lasso(D, lam)
    assert res.converged
    assert lasso_kkt_residual(res.beta, D, lam) <= 1e-6
    f0 = lasso_objective(res.beta, D, lam)
    for _ in range(20):
        assert lasso_objective(res.beta + 1e-4 * rng.standard_normal(p), D, lam) >= f0 - 1e-12


def test_sqrt_lasso_examples(rng):
    y = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(solve_sqrt_lasso(Dataset(np.eye(3), y), 0.0).beta, y, atol=1e-8)
    R = random_dataset(rng, 8, 5)
    l0 = np.abs(R.X.T @ R.y).max() / (np.sqrt(R.n) * np.linalg.norm(R.y))
    np.testing.assert_allclose(solve_sqrt_lasso(R, 1.01 * l0).beta, 0.0, atol=1e-9)


@settings(max_examples=15)
@given(st.integers(2, 10), st.integers(1, 15), st.floats(1e-3, 0.5), st.integers(0, 2**31))
def test_sqrt_lasso_beats_lasso_point(n, p, lam, seed):
    rng = np.random.default_rng(seed)
    D = random_dataset(rng, n, p)
    res = solve_sqrt_lasso(D, lam)
    assert res.converged
    other = solve_lasso(D, lam).beta
    assert res.objective_value <= sqrt_lasso_objective(other, D, lam) + 1e-9


# --- interpolators and the dual certificate --------------------------------


def test_interpolator_examples():
    np.testing.assert_allclose(min_norm_interpolator(Dataset(np.eye(2), np.ones(2)), "linf").beta, [1.0, 1.0], atol=1e-10)
    row = Dataset(np.array([[1.0, 1.0]]), np.array([2.0]))
    np.testing.assert_allclose(min_norm_interpolator(row, "l2").beta, [1.0, 1.0])
    b = min_norm_interpolator(row, "linf").beta
    assert any(np.allclose(b, v, atol=1e-9) for v in ([2.0, 0.0], [0.0, 2.0]))


def test_rank_deficient_design_rejected():
    D = Dataset(np.array([[1.0, 2.0], [2.0, 4.0]]), np.array([1.0, 1.0]))
    with pytest.raises(RankDeficientError):
        min_norm_interpolator(D, "l2")
    with pytest.raises(RankDeficientError):
        solve_dual_certificate(D, "linf")


def test_dual_examples(rng):
    y = np.array([1.5, -2.0, 2.5])
    cert = solve_dual_certificate(Dataset(np.eye(3), y), "linf")
    np.testing.assert_allclose(cert.alpha, np.sign(y), atol=1e-9)
    assert cert.objective == pytest.approx(6.0)
    D = random_dataset(rng, 4, 9)
    K = D.X @ D.X.T
    v = np.linalg.solve(K, D.y)
    np.testing.assert_allclose(solve_dual_certificate(D, "l2").alpha, v / np.sqrt(D.y @ v), rtol=1e-9)
    zero = solve_dual_certificate(Dataset(D.X, np.zeros(4)), "linf")
    np.testing.assert_array_equal(zero.alpha, 0.0)
    assert zero.objective == 0.0


@settings(max_examples=25)
@given(st.integers(1, 8), st.integers(0, 12), st.integers(0, 2**31))
def test_min_l1_two_routes_and_strong_duality(n, extra, seed):
    rng = np.random.default_rng(seed)
    D = random_dataset(rng, n, n + extra)
    admm = min_norm_interpolator(D, "linf").beta
    lp = min_l1_from_lp(D)
    np.testing.assert_allclose(D.X @ admm, D.y, atol=1e-8)
    assert np.abs(admm).sum() == pytest.approx(np.abs(lp).sum(), rel=1e-7)
    cert = solve_dual_certificate(D, "linf")
    assert cert.constraint_norm <= 1 + 1e-9
    assert cert.objective == pytest.approx(np.abs(lp).sum(), rel=1e-7)


@settings(max_examples=20)
@given(st.integers(1, 8), st.integers(0, 12), st.integers(0, 2**31))
def test_min_l2_duality(n, extra, seed):
    rng = np.random.default_rng(seed)
    D = random_dataset(rng, n, n + extra)
    b = min_norm_interpolator(D, "l2").beta
    assert solve_dual_certificate(D, "l2").objective == pytest.approx(np.linalg.norm(b), rel=1e-9)


def test_linmap_dual_matches_interpolator(rng):
    D = random_dataset(rng, 5, 12)
    S = rng.choice([-1.0, 1.0], size=(9, 12))
    for attack in ("l2", "linf"):
        th = min_norm_interpolator_linmap(D, S, attack).beta
        np.testing.assert_allclose(D.X @ S.T @ th, D.y, atol=1e-8)
        cert = dual_certificate_linmap(D, S, attack)
        assert cert.objective == pytest.approx(norm(S.T @ th, NormKind(attack).dual), rel=1e-7)
