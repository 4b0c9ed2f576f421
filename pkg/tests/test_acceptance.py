"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` to see the lines as
they are produced; they are also repeated in the terminal summary.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from advlinreg.adversarial import (
    AdvConfig,
    GeneralLossKind,
    adv_loss_general,
    adv_risk,
    adv_risk_sampled,
    base_loss,
    general_worst_case_perturbation,
    robust_colset_worst_case,
    robust_colset_worst_value,
    robust_rowset_worst_value,
    sample_ball,
    worst_case_perturbations,
)
from advlinreg.datagen import ScenarioSpec, gen_gaussian, rng_for
from advlinreg.experiments.cli import main as cli_main
from advlinreg.experiments.runners import transition_within_one_step
from advlinreg.experiments.tables import SweepTable
from advlinreg.norms import Dataset, NormKind, norm
from advlinreg.solvers import (
    adv_objective,
    lasso_kkt_residual,
    lasso_objective,
    min_l1_from_lp,
    min_norm_interpolator,
    optimality_residual,
    ridge_gradient_norm,
    solve_adv,
    solve_dual_certificate,
    solve_lasso,
    solve_ridge,
)
from advlinreg.theory import (
    adv_bound_report,
    delta_bar,
    delta_bar_bounds,
    delta_star,
    lasso_bound_report,
    lasso_lambda_star,
    reference_radius,
    robustness_gap_bound,
    shrinkage_equiv_check,
    zero_threshold,
)

from conftest import ACCEPTANCE_LINES

START = time.perf_counter()
CERT_TOL = 1e-6

# converged fits collected by the other criteria and re-checked by criterion 10
FITS: list[tuple[str, Dataset, float | AdvConfig, object]] = []


def report(num: int, name: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d} {name}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def _reg(attack: str) -> NormKind:
    return NormKind(attack).dual


# 1 ---------------------------------------------------------------------------


def test_01_dual_form_equivalence():
    t0 = time.perf_counter()
    rng = rng_for(1, "acceptance-dual")
    worst_rel, worst_excess = 0.0, -np.inf
    for i in range(1000):
        n, p = int(rng.integers(1, 6)), int(rng.integers(1, 7))
        attack = ("l2", "linf")[i % 2]
        X, beta = rng.standard_normal((n, p)), rng.standard_normal(p)
        cfg = AdvConfig(float(rng.uniform(0.0, 1.5)), attack)
        y_reg = rng.standard_normal(n)
        D = Dataset(X, y_reg)
        # squared loss over the whole sample: closed form vs constructed maximiser
        closed = adv_risk(beta, D, cfg)
        W = worst_case_perturbations(beta, D, cfg)
        primal = float(np.mean((y_reg - np.einsum("ij,j->i", X + W, beta)) ** 2))
        worst_rel = max(worst_rel, abs(primal - closed) / max(closed, 1e-300))
        sampled = adv_risk_sampled(beta, D, cfg, samples=50, seed=i, include_worst_case=False)
        worst_excess = max(worst_excess, (sampled - closed) / max(closed, 1e-300))
        margin = cfg.delta * norm(beta, cfg.regularizer)
        for kind in GeneralLossKind:
            for j in range(n):
                y = (1.0 if y_reg[j] >= 0 else -1.0) if kind.is_classification else float(y_reg[j])
                cl = adv_loss_general(float(X[j] @ beta), y, margin, kind)
                dx = general_worst_case_perturbation(X[j], beta, y, cfg, kind)
                assert norm(dx, attack) <= cfg.delta * (1 + 1e-12) + 1e-15
                brute = float(base_loss((X[j] + dx) @ beta, kind, y))
                worst_rel = max(worst_rel, abs(brute - cl) / max(abs(cl), 1e-300))
                U = sample_ball(rng, 20, p, cfg.delta, attack)
                samp = float(np.max(base_loss((X[j] + U) @ beta, kind, y)))
                worst_excess = max(worst_excess, (samp - cl) / max(abs(cl), 1e-300))
    secs = time.perf_counter() - t0
    ok = worst_rel <= 1e-9 and worst_excess <= 1e-12 and secs < 30
    report(1, "dual-form equivalence", ok, f"max rel err {worst_rel:.2e}, max sampled excess {worst_excess:.2e}, {secs:.1f}s")


# 2 ---------------------------------------------------------------------------


def test_02_interpolation_transition():
    t0 = time.perf_counter()
    failures = []
    worst_norm_rel = 0.0
    for seed in range(20):
        D = gen_gaussian(n=60, p=200, n_test=1, seed=seed).train
        for attack in ("l2", "linf"):
            db = delta_bar(D, attack)
            mn = min_norm_interpolator(D, attack)
            below = solve_adv(D, AdvConfig(0.9 * db, attack))
            above = solve_adv(D, AdvConfig(1.1 * db, attack))
            for r, d in ((below, 0.9 * db), (above, 1.1 * db)):
                if r.converged:
                    FITS.append(("adv", D, AdvConfig(d, attack), r))
            rel = abs(norm(below.beta, _reg(attack)) - norm(mn.beta, _reg(attack))) / norm(mn.beta, _reg(attack))
            worst_norm_rel = max(worst_norm_rel, rel)
            if not (D.mse(below.beta) <= 1e-6 and rel <= 1e-4 and D.mse(above.beta) > 1e-6):
                failures.append((seed, attack, D.mse(below.beta), rel, D.mse(above.beta)))
    secs = time.perf_counter() - t0
    ok = not failures and secs < 300
    report(2, "interpolation transition", ok, f"40 cases, failures {failures}, max norm rel diff {worst_norm_rel:.1e}, {secs:.0f}s")


# 3 ---------------------------------------------------------------------------


def test_03_zero_solution_threshold():
    rng = rng_for(3, "acceptance-zero")
    failures = 0
    for i in range(50):
        n, p = int(rng.integers(3, 30)), int(rng.integers(2, 60))
        D = Dataset(rng.standard_normal((n, p)), rng.standard_normal(n))
        for attack in ("l2", "linf"):
            zt = zero_threshold(D, attack)
            lo = solve_adv(D, AdvConfig(0.95 * zt, attack))
            hi = solve_adv(D, AdvConfig(1.05 * zt, attack))
            for r, d in ((lo, 0.95 * zt), (hi, 1.05 * zt)):
                if r.converged:
                    FITS.append(("adv", D, AdvConfig(d, attack), r))
            if not (norm(lo.beta, "l2") > 1e-6 and norm(hi.beta, "l2") <= 1e-6):
                failures += 1
    report(3, "zero-solution threshold", failures == 0, f"100 cases, {failures} failures")


# 4 ---------------------------------------------------------------------------


def test_04_delta_bar_bracket():
    rng = rng_for(4, "acceptance-bracket")
    failures, tightest = 0, np.inf
    for _ in range(100):
        n = int(rng.integers(2, 40))
        D = Dataset(rng.standard_normal((n, n + int(rng.integers(0, 120)))), rng.standard_normal(n))
        for attack in ("l2", "linf"):
            v = D.n * delta_bar(D, attack)
            lo, hi = delta_bar_bounds(D, attack)
            tightest = min(tightest, v / lo - 1, hi / v - 1)
            failures += not (lo <= v <= hi)
    report(4, "delta_bar bracket", failures == 0, f"200 cases, {failures} failures, smallest relative slack {tightest:.2e}")


# 5 ---------------------------------------------------------------------------


def test_05_prediction_bounds_and_pivotality():
    t0 = time.perf_counter()
    adv_fail = lasso_fail = 0
    worst_adv = worst_lasso = 0.0
    for seed in range(100):
        s = gen_gaussian(n=100, p=200, sparsity=5, sigma=1.0, n_test=1, seed=seed)
        D, X, eps, bstar = s.train, s.train.X, s.truth.eps, s.truth.beta_star
        d = 1.05 * delta_star(X, eps)
        r = solve_adv(D, AdvConfig(d, "linf"))
        if r.converged:
            FITS.append(("adv", D, AdvConfig(d, "linf"), r))
        rep = adv_bound_report(X, eps, r.beta, bstar, d)
        adv_fail += not rep.holds
        worst_adv = max(worst_adv, rep.lhs_observed / rep.bound_rhs)
        lam = 1.05 * 3 * np.abs(X.T @ eps).max() / D.n
        lr = solve_lasso(D, lam)
        if lr.converged:
            FITS.append(("lasso", D, lam, lr))
        lrep = lasso_bound_report(X, eps, lr.beta, bstar, lam)
        lasso_fail += not lrep.holds
        worst_lasso = max(worst_lasso, lrep.lhs_observed / lrep.bound_rhs)
    # pivotality: the radius ignores the noise scale, the Lasso level does not
    s = gen_gaussian(n=100, p=200, sparsity=5, n_test=1, seed=0)
    X, eps = s.train.X, s.truth.eps
    piv_rel = abs(delta_star(X, 10 * eps) - delta_star(X, eps)) / delta_star(X, eps)
    lam_ratio = lasso_lambda_star(X, 10 * eps) / lasso_lambda_star(X, eps)
    ok = adv_fail == 0 and lasso_fail == 0 and piv_rel < 1e-12 and abs(lam_ratio - 10) < 1e-9
    report(
        5,
        "prediction bounds",
        ok,
        f"adv failures {adv_fail} (max lhs/rhs {worst_adv:.2e}), lasso failures {lasso_fail} (max {worst_lasso:.2e}), "
        f"delta* change {piv_rel:.1e}, lambda* ratio {lam_ratio:.6f}, {time.perf_counter() - t0:.0f}s",
    )


# 6 ---------------------------------------------------------------------------


def _gap_and_se(beta: np.ndarray, T: Dataset, margin: float) -> tuple[float, float]:
    r = np.abs(T.y - T.X @ beta)
    a, b = (r + margin) ** 2, r**2
    A, B = a.mean(), b.mean()
    gap = np.sqrt(A) - np.sqrt(B)
    # delta-method standard error of sqrt(mean a) - sqrt(mean b)
    g = a / (2 * np.sqrt(A)) - b / (2 * np.sqrt(B))
    return float(gap), float(g.std(ddof=1) / np.sqrt(T.n))


def test_06_robustness_gap():
    fails = []
    for seed in range(20):
        s = gen_gaussian(n=60, p=200, n_test=10_000, seed=seed)
        D, T = s.train, s.test
        for attack in ("l2", "linf"):
            db = delta_bar(D, attack)
            b = min_norm_interpolator(D, attack).beta
            dt = reference_radius(D.X, attack)
            bound = robustness_gap_bound(adv_risk(b, D, AdvConfig(db, attack)), dt, db)
            gap, se = _gap_and_se(b, T, dt * norm(b, _reg(attack)))
            if gap > bound + 3 * se:
                fails.append((seed, attack, gap, bound))
        # mismatched: l2-trained interpolator attacked in Linf at test time
        db2 = delta_bar(D, "l2")
        b2 = min_norm_interpolator(D, "l2").beta
        dt = reference_radius(D.X, "linf")
        bound = robustness_gap_bound(adv_risk(b2, D, AdvConfig(db2, "l2")), dt, db2, mismatched=True, p=D.p)
        gap, se = _gap_and_se(b2, T, dt * norm(b2, "l1"))
        if gap > bound + 3 * se:
            fails.append((seed, "mismatched", gap, bound))
    report(6, "robustness gap", not fails, f"60 cases (20 seeds x l2, linf, mismatched), failures {fails}")


# 7 ---------------------------------------------------------------------------


def _unique_basis_pursuit(D: Dataset) -> tuple[bool, float]:
    b = min_l1_from_lp(D)
    S = np.abs(b) > 1e-9 * np.abs(b).max()
    alpha = solve_dual_certificate(D, "linf").alpha
    off = np.abs(D.X.T @ alpha)[~S]
    strict = off.size == 0 or off.max() < 1 - 1e-7
    full = np.linalg.matrix_rank(D.X[:, S]) == S.sum()
    return bool(strict and full), float(np.abs(b).sum())


def test_07_limit_convergence():
    rng = rng_for(7, "acceptance-limits")
    ridge_worst = 0.0
    lasso_fail = []
    checked = 0
    for i in range(10):
        n = int(rng.integers(5, 25))
        D = Dataset(rng.standard_normal((n, n + int(rng.integers(5, 60)))), rng.standard_normal(n))
        rr = solve_ridge(D, 1e-8)
        FITS.append(("ridge", D, 1e-8, rr))
        mn = min_norm_interpolator(D, "l2").beta
        ridge_worst = max(ridge_worst, np.linalg.norm(rr.beta - mn) / np.linalg.norm(mn))
        unique, target = _unique_basis_pursuit(D)
        if not unique:
            continue
        checked += 1
        lmax = 2 * np.abs(D.X.T @ D.y).max() / D.n
        norms = []
        for lam in lmax * np.geomspace(1.0, 1e-8, 25):
            res = solve_lasso(D, float(lam))
            if res.converged:
                FITS.append(("lasso", D, float(lam), res))
            norms.append(np.abs(res.beta).sum())
        norms = np.array(norms)
        mono = np.all(np.diff(norms) >= -1e-9 * target) and norms.max() <= target * (1 + 1e-9)
        close = abs(norms[-1] - target) / target
        if not (mono and close <= 1e-4):
            lasso_fail.append((i, bool(mono), close))
    ok = ridge_worst <= 1e-4 and not lasso_fail and checked >= 5
    report(7, "limit convergence", ok, f"ridge max rel diff {ridge_worst:.1e}; lasso on {checked} unique-BP instances, failures {lasso_fail}")


# 8 ---------------------------------------------------------------------------


def test_08_robust_regression_equivalences():
    rng = rng_for(8, "acceptance-robust")
    row_err = col_err = 0.0
    row_excess = col_excess = -np.inf
    for i in range(500):
        n, p = int(rng.integers(1, 10)), int(rng.integers(1, 10))
        D = Dataset(rng.standard_normal((n, p)), rng.standard_normal(n))
        beta = rng.standard_normal(p)
        delta = float(rng.uniform(0.0, 2.0))
        attack = ("l2", "linf")[i % 2]
        cfg = AdvConfig(delta, attack)
        # rows bounded in the attack norm
        closed_row = float(np.sqrt(np.sum((np.abs(D.residual(beta)) + delta * norm(beta, cfg.regularizer)) ** 2)))
        row_err = max(row_err, abs(robust_rowset_worst_value(beta, D, cfg) - closed_row) / max(closed_row, 1e-300))
        U = sample_ball(rng, n, p, delta, attack)
        row_excess = max(row_excess, np.linalg.norm(D.y - (D.X + U) @ beta) - closed_row)
        # columns bounded in l2
        Delta = robust_colset_worst_case(beta, D, delta)
        closed_col = robust_colset_worst_value(beta, D, delta)
        col_err = max(col_err, abs(np.linalg.norm(D.y - (D.X + Delta) @ beta) - closed_col) / max(closed_col, 1e-300))
        V = sample_ball(rng, p, n, delta, "l2").T
        col_excess = max(col_excess, np.linalg.norm(D.y - (D.X + V) @ beta) - closed_col)
    ok = row_err <= 1e-9 and col_err <= 1e-9 and row_excess <= 1e-9 and col_excess <= 1e-9
    report(8, "robust-regression equivalences", ok, f"row-set rel err {row_err:.1e}, column-set rel err {col_err:.1e}, random disturbances never exceed")


# 9 ---------------------------------------------------------------------------


def test_09_shrinkage_equivalence():
    rng = rng_for(9, "acceptance-shrink")
    worst, met = 0.0, 0
    for i in range(50):
        n, p = int(rng.integers(10, 40)), int(rng.integers(2, 8))
        X = rng.standard_normal((n, p))
        X -= X.mean(axis=0)
        y = 3.0 + rng.uniform(0.0, 2.0, n)
        D = Dataset(X, y)
        attack = ("linf", "l2")[i % 2]
        delta = 0.5 * zero_threshold(D, attack)
        # shrink the radius range until the norm condition holds
        for _ in range(40):
            cfg = AdvConfig(delta, attack)
            res = solve_adv(D, cfg)
            rep = shrinkage_equiv_check(res.beta, D, cfg)
            if rep.conditions_met:
                break
            delta *= 1.3
        met += rep.conditions_met
        if rep.conditions_met:
            FITS.append(("adv", D, cfg, res))
            worst = max(worst, rep.modified_objective_residual)
    ok = met == 50 and worst <= 1e-6
    report(9, "shrinkage equivalence", ok, f"conditions met on {met}/50, max modified-objective residual {worst:.1e}")


# 10 --------------------------------------------------------------------------


def _own_fits() -> list:
    rng = rng_for(10, "acceptance-cert")
    out = []
    for i in range(20):
        n, p = int(rng.integers(3, 20)), int(rng.integers(2, 30))
        D = Dataset(rng.standard_normal((n, p)), rng.standard_normal(n))
        cfg = AdvConfig(float(rng.uniform(0.01, 1.0)) * zero_threshold(D, ("l2", "linf")[i % 2]), ("l2", "linf")[i % 2])
        out.append(("adv", D, cfg, solve_adv(D, cfg)))
        lam = float(rng.uniform(0.01, 1.0)) * 2 * np.abs(D.X.T @ D.y).max() / n
        out.append(("lasso", D, lam, solve_lasso(D, lam)))
    return out


def test_10_solver_certification():
    rng = rng_for(10, "acceptance-perturb")
    fits = [f for f in FITS] + _own_fits()
    checked = bad_cert = bad_local = 0
    for kind, D, param, res in fits:
        if not res.converged:
            continue
        checked += 1
        b = np.asarray(res.beta)
        if kind == "adv":
            cert = optimality_residual(b, D, param)
            f = lambda v: adv_objective(v, D.X, D.y, None, param)  # noqa: E731
        elif kind == "lasso":
            cert = lasso_kkt_residual(b, D, param)
            f = lambda v: lasso_objective(v, D, param)  # noqa: E731
        else:
            cert = ridge_gradient_norm(b, D, param)
            f = lambda v: D.mse(v) + param * float(v @ v)  # noqa: E731
        bad_cert += cert > CERT_TOL
        f0 = f(b)
        scales = 10.0 ** rng.uniform(-7, -1, 100)
        P = rng.standard_normal((100, D.p)) * scales[:, None]
        vals = np.array([f(b + d) for d in P])
        bad_local += bool(np.any(vals < f0 - 1e-12 * max(1.0, abs(f0))))
    ok = checked > 0 and bad_cert == 0 and bad_local == 0
    report(10, "solver certification", ok, f"{checked} converged fits, {bad_cert} certificate failures, {bad_local} improved by a perturbation")


# 11 --------------------------------------------------------------------------


def test_11_end_to_end_figures(tmp_path):
    results = []
    for attack in ("l2", "linf"):
        out = tmp_path / f"sweep-{attack}.csv"
        rc = cli_main(["sweep", "--scenario", "gaussian", "--n", "60", "--p", "200", "--attack", attack, "--n-test", "1000", "--out", str(out)])
        t = SweepTable.from_csv(out)
        results.append((attack, rc, transition_within_one_step(t)))
    out = tmp_path / "curve.csv"
    rc_curve = cli_main(["threshold-curve", "--n", "60", "--p-values", "80,120,200,400", "--repetitions", "5", "--attack", "l2", "--out", str(out)])
    curve = SweepTable.from_csv(out).column("delta_bar")
    nondecreasing = bool(np.all(np.diff(curve) >= 0))
    total = time.perf_counter() - START
    ok = all(rc == 0 and hit for _, rc, hit in results) and rc_curve == 0 and nondecreasing and total < 1200
    report(
        11,
        "end-to-end figures",
        ok,
        f"sweep transitions {[(a, h) for a, _, h in results]}, delta_bar medians {np.round(curve, 4).tolist()}, "
        f"acceptance run {total:.0f}s",
    )


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-s", "-q"]))
