"""Ridge, Lasso and square-root Lasso.

All three use the ``1/n`` scaling of the data-fit term::

    ridge        (1/n)||y - X b||^2 + lam ||b||_2^2
    lasso        (1/n)||y - X b||^2 + lam ||b||_1
    sqrt-lasso   sqrt((1/n)||y - X b||^2) + lam ||b||_1
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from ..norms import Dataset
from ._barrier import SOC, ConicProblem, barrier_solve
from ._types import FitResult, RankDeficientError, SolverOptions
from .certificate import lasso_kkt_residual, ridge_gradient_norm, sqrt_lasso_residual

__all__ = ["solve_ridge", "solve_lasso", "solve_sqrt_lasso", "lasso_objective", "sqrt_lasso_objective"]


def lasso_objective(beta: np.ndarray, D: Dataset, lam: float) -> float:
    return D.mse(beta) + lam * float(np.abs(beta).sum())


def sqrt_lasso_objective(beta: np.ndarray, D: Dataset, lam: float) -> float:
    return float(np.sqrt(D.mse(beta))) + lam * float(np.abs(beta).sum())


def solve_ridge(D: Dataset, lam: float) -> FitResult:
    """Closed-form ridge; uses the ``n x n`` dual system when ``p > n``."""
    lam = float(lam)
    if not lam > 0:
        raise ValueError("ridge needs lam > 0")
    X, y = D.X, D.y
    n, p = X.shape
    if p > n:
        K = X @ X.T
        K[np.diag_indices(n)] += n * lam
        beta = X.T @ sla.solve(K, y, assume_a="pos")
    else:
        K = X.T @ X
        K[np.diag_indices(p)] += n * lam
        beta = sla.solve(K, X.T @ y, assume_a="pos")
    obj = D.mse(beta) + lam * float(beta @ beta)
    g = ridge_gradient_norm(beta, D, lam)
    return FitResult(beta, obj, g, 1, True, method="ridge")


def _lasso_support_solve(D: Dataset, lam: float, beta: np.ndarray) -> np.ndarray | None:
    """Solve the stationarity equations on the support and signs of ``beta``."""
    S = np.flatnonzero(beta)
    if S.size == 0 or S.size > D.n:
        return None
    XS = D.X[:, S]
    G = XS.T @ XS
    try:
        cf = sla.cho_factor(G)
    except sla.LinAlgError:
        return None
    rhs = XS.T @ D.y - 0.5 * D.n * lam * np.sign(beta[S])
    out = np.zeros(D.p)
    out[S] = sla.cho_solve(cf, rhs)
    if np.any(np.sign(out[S]) != np.sign(beta[S])):
        return None
    return out


def _lasso_homotopy(D: Dataset, lam: float, max_steps: int = 20_000) -> tuple[np.ndarray, int]:
    """Follow the piecewise-linear Lasso path from ``lam_max`` down to ``lam``.

    Works with ``gamma = n lam / 2`` so that stationarity reads
    ``X_A.T (y - X b) = gamma s_A`` on the active set ``A``.
    """
    X, y = D.X, D.y
    n, p = X.shape
    target = 0.5 * n * lam
    beta = np.zeros(p)
    c = X.T @ y
    gamma = float(np.abs(c).max(initial=0.0))
    if gamma <= target or gamma == 0:
        return beta, 0
    active = np.zeros(p, dtype=bool)
    active[int(np.argmax(np.abs(c)))] = True
    steps = 0
    while gamma > target and steps < max_steps:
        steps += 1
        A = np.flatnonzero(active)
        XA = X[:, A]
        sA = np.sign(c[A])
        d = np.linalg.lstsq(XA.T @ XA, sA, rcond=None)[0]
        a = X.T @ (XA @ d)
        # a step t lowers gamma by t; inactive correlations move by -t a_j
        t_max = gamma - target
        t_join = np.inf
        join = -1
        inact = np.flatnonzero(~active)
        for sign in (1.0, -1.0):
            den = 1.0 - sign * a[inact]
            num = gamma - sign * c[inact]
            with np.errstate(divide="ignore", invalid="ignore"):
                tt = np.where(den > 1e-14, num / den, np.inf)
            tt = np.where(tt > 1e-14 * max(gamma, 1.0), tt, np.inf)
            if tt.size and tt.min() < t_join:
                t_join = float(tt.min())
                join = int(inact[np.argmin(tt)])
        with np.errstate(divide="ignore", invalid="ignore"):
            tc = np.where(d * beta[A] < 0, -beta[A] / d, np.inf)
        tc = np.where(tc > 1e-14 * max(gamma, 1.0), tc, np.inf)
        t_cross = float(tc.min()) if tc.size else np.inf
        t = min(t_max, t_join, t_cross)
        beta[A] += t * d
        c = c - t * a
        gamma -= t
        if t == t_cross and t_cross <= t_join:
            k = A[int(np.argmin(tc))]
            beta[k] = 0.0
            active[k] = False
        elif t == t_join:
            active[join] = True
        # re-anchor the correlations to limit drift
        c = X.T @ (y - X @ beta)
    return beta, steps


def solve_lasso(D: Dataset, lam: float, opts: SolverOptions | None = None) -> FitResult:
    """Lasso by cyclic coordinate descent with soft-thresholding.

    Sweeps alternate between full passes and passes over the active set.
    Every few sweeps the stationarity equations are solved exactly on the
    current support; the result is kept when its KKT residual certifies.  If
    coordinate descent does not certify within its sweep budget (typical for
    very small ``lam`` with ``p > n``), the exact homotopy path is followed
    down to ``lam`` instead.
    """
    opts = opts or SolverOptions()
    lam = float(lam)
    if lam < 0:
        raise ValueError("lasso needs lam >= 0")
    X, y = D.X, D.y
    n, p = X.shape
    tol = opts.certificate_tolerance
    col_sq = np.einsum("ij,ij->j", X, X)
    live = col_sq > 0
    beta = np.zeros(p)
    r = y.copy()
    thresh = 0.5 * n * lam
    best = (lasso_kkt_residual(beta, D, lam), beta.copy())
    sweeps = 0
    max_sweeps = min(opts.max_iterations, 1000)

    def sweep(idx: np.ndarray) -> float:
        nonlocal r
        biggest = 0.0
        for j in idx:
            old = beta[j]
            rho = X[:, j] @ r + col_sq[j] * old
            new = np.sign(rho) * max(abs(rho) - thresh, 0.0) / col_sq[j]
            if new != old:
                r -= X[:, j] * (new - old)
                beta[j] = new
                biggest = max(biggest, abs(new - old) * np.sqrt(col_sq[j]))
        return biggest

    all_idx = np.flatnonzero(live)
    yscale = max(1.0, float(np.linalg.norm(y)))
    while sweeps < max_sweeps:
        sweeps += 1
        change = sweep(all_idx)
        active = np.flatnonzero(beta)
        for _ in range(50):
            if active.size == 0:
                break
            sweeps += 1
            if sweep(active) <= 1e-13 * yscale:
                break
        if sweeps % 5 == 0 or change <= 1e-12 * yscale:
            for cand in (beta.copy(), _lasso_support_solve(D, lam, beta)):
                if cand is None:
                    continue
                res = lasso_kkt_residual(cand, D, lam)
                if res < best[0]:
                    best = (res, cand)
            if best[0] <= tol:
                break
        if change == 0.0:
            break
    method = "lasso-cd"
    # an absolute residual is trivially small when lam is tiny; also ask for
    # agreement relative to lam before trusting the coordinate-descent answer
    if best[0] > tol or (lam > 0 and best[0] > tol * lam):
        b, steps = _lasso_homotopy(D, lam)
        sweeps += steps
        for cand in (b, _lasso_support_solve(D, lam, b)):
            if cand is not None:
                res = lasso_kkt_residual(cand, D, lam)
                if res < best[0] or (res <= tol * max(lam, 1e-300) and best[0] > tol * lam):
                    best = (res, cand)
                    method = "lasso-homotopy"
    res, beta = best
    return FitResult(beta, lasso_objective(beta, D, lam), res, sweeps, res <= tol, method=method)


def _sqrt_lasso_newton(D: Dataset, lam: float, beta: np.ndarray) -> np.ndarray | None:
    S = np.flatnonzero(beta)
    if S.size == 0:
        return None
    XS = D.X[:, S]
    s = np.sign(beta[S])
    b = beta[S].copy()
    n = D.n

    def f(b):
        r = D.y - XS @ b
        return np.linalg.norm(r) / np.sqrt(n) + lam * (s @ b)

    for _ in range(100):
        r = D.y - XS @ b
        nr = np.linalg.norm(r)
        if nr == 0:
            return None
        g = -(XS.T @ r) / (np.sqrt(n) * nr) + lam * s
        u = r / nr
        H = (XS.T @ XS - np.outer(XS.T @ u, XS.T @ u)) / (np.sqrt(n) * nr)
        try:
            step = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            return None
        t, f0 = 1.0, f(b)
        while t > 1e-12 and f(b + t * step) > f0 + 1e-4 * t * (g @ step):
            t *= 0.5
        b = b + t * step
        if np.linalg.norm(t * step) <= 1e-15 * (1 + np.linalg.norm(b)):
            break
    if np.any(np.sign(b) != s):
        return None
    out = np.zeros(D.p)
    out[S] = b
    return out


def solve_sqrt_lasso(D: Dataset, lam: float, opts: SolverOptions | None = None) -> FitResult:
    """Square-root Lasso as a second-order cone program.

    ``min t/sqrt(n) + lam 1'w  s.t.  ||y - X b||_2 <= t, |b| <= w`` is solved
    by the barrier method and then refined by Newton's method on the
    detected support.  When the minimiser interpolates, the minimum-l1
    interpolator is also tried; the certificate at an interpolating point
    uses the full ball subdifferential of the residual norm.
    """
    opts = opts or SolverOptions()
    lam = float(lam)
    if lam < 0:
        raise ValueError("sqrt-lasso needs lam >= 0")
    X = D.X
    n, p = X.shape
    tol = opts.certificate_tolerance
    ys = float(np.abs(D.y).max())
    if ys == 0:
        z = np.zeros(p)
        return FitResult(z, 0.0, sqrt_lasso_residual(z, D, lam), 0, True, method="sqrt-lasso")
    y = D.y / ys
    nv = 2 * p + 1  # [b, w, t]
    q = np.concatenate([np.zeros(p), lam * np.ones(p), [1.0 / np.sqrt(n)]])
    I = np.eye(p)
    G = np.hstack([np.block([[I, -I], [-I, -I]]), np.zeros((2 * p, 1))])
    F = np.hstack([-X, np.zeros((n, p + 1))])
    c = np.zeros(nv)
    c[-1] = 1.0
    prob = ConicProblem(P=None, q=q, G=G, h=np.zeros(2 * p), cones=[SOC(F=F, g=y, c=c, e=0.0)])
    z0 = np.concatenate([np.zeros(p), np.ones(p), [np.linalg.norm(y) + 1.0]])
    br = barrier_solve(prob, z0, gap_tol=opts.smoothing_floor)
    b = br.z[:p] * ys

    cands = [b, np.zeros(p)]
    for thr in (1e-10, 1e-8, 1e-6, 1e-4):
        bt = b.copy()
        bt[np.abs(bt) <= thr * max(1e-300, np.abs(b).max())] = 0.0
        cands.append(bt)
        nb = _sqrt_lasso_newton(D, lam, bt)
        if nb is not None:
            cands.append(nb)
    if n <= p:
        from .interpolators import min_norm_interpolator

        try:
            cands.append(np.asarray(min_norm_interpolator(D, "linf", opts).beta))
        except RankDeficientError:
            pass
    scored = [(sqrt_lasso_residual(cb, D, lam), sqrt_lasso_objective(cb, D, lam), cb) for cb in cands]
    ok = [s for s in scored if s[0] <= tol]
    res, val, beta = min(ok, key=lambda s: s[1]) if ok else min(scored, key=lambda s: s[0])
    return FitResult(beta, val, res, br.newton_steps, res <= tol, method="sqrt-lasso")
