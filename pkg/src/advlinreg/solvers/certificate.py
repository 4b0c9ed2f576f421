"""Optimality certificates: distance from zero to a subdifferential.

For a convex objective written as a fixed vector plus free selections from
boxes (``sigma in [-1, 1]``) and Euclidean balls (``||v|| <= 1``), the
distance ``min ||a + B @ sigma + C @ v||`` is an upper bound on
``dist(0, subdifferential)`` that is exact when every free selection is
included.  The box-only case is solved exactly by bounded-variable least
squares; a lone ball by the trust-region secular equation.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import lsq_linear

from ..adversarial import AdvConfig
from ..norms import Dataset, NormKind, norm

__all__ = [
    "min_norm_selection",
    "optimality_residual",
    "adv_subgradient_parts",
    "lasso_kkt_residual",
    "sqrt_lasso_residual",
    "ridge_gradient_norm",
    "modified_objective_residual",
]

DEFAULT_ZERO_TOL = 1e-9


def _ball_only(a: np.ndarray, C: np.ndarray) -> float:
    U, sig, Vt = np.linalg.svd(C, full_matrices=False)
    b = U.T @ a
    keep = sig > sig.max(initial=0.0) * 1e-14
    sig, b = sig[keep], b[keep]
    if sig.size == 0:
        return float(np.linalg.norm(a))
    out_of_range = a - U[:, keep] @ b

    def vnorm(mu: float) -> float:
        return float(np.linalg.norm(sig * b / (sig**2 + mu)))

    if vnorm(0.0) <= 1.0:
        return float(np.linalg.norm(out_of_range))
    lo, hi = 0.0, max(1.0, float(np.linalg.norm(sig * b)))
    while vnorm(hi) > 1.0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if vnorm(mid) > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    coef = sig / (sig**2 + hi)
    # a + C v with v = -V diag(coef) b  ->  in-range part b - sig*coef*b
    in_range = b - sig * coef * b
    return float(np.sqrt(in_range @ in_range + out_of_range @ out_of_range))


def _box_only(a: np.ndarray, B: np.ndarray) -> float:
    if not np.any(B):
        return float(np.linalg.norm(a))
    res = lsq_linear(B, -a, bounds=(-1.0, 1.0), method="bvls", tol=1e-15, max_iter=10 * B.shape[1] + 100)
    sigma = np.clip(res.x, -1.0, 1.0)
    return float(np.linalg.norm(a + B @ sigma))


def _mixed_fista(a: np.ndarray, B: np.ndarray, C: np.ndarray, iters: int = 20000) -> float:
    A = np.hstack([B, C])
    nb = B.shape[1]
    L = np.linalg.norm(A, 2) ** 2
    if L == 0:
        return float(np.linalg.norm(a))

    def project(x: np.ndarray) -> np.ndarray:
        x = x.copy()
        x[:nb] = np.clip(x[:nb], -1.0, 1.0)
        nv = np.linalg.norm(x[nb:])
        if nv > 1.0:
            x[nb:] /= nv
        return x

    x = np.zeros(A.shape[1])
    yk = x.copy()
    t = 1.0
    best = np.linalg.norm(a)
    for _ in range(iters):
        grad = A.T @ (a + A @ yk)
        xn = project(yk - grad / L)
        val = np.linalg.norm(a + A @ xn)
        best = min(best, val)
        if np.linalg.norm(xn - x) <= 1e-14 * (1.0 + np.linalg.norm(x)):
            break
        tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        yk = xn + ((t - 1.0) / tn) * (xn - x)
        x, t = xn, tn
    return float(best)


def _mixed(a: np.ndarray, B: np.ndarray, C: np.ndarray) -> float:
    """Box and ball together: second-order cone program ``min t, ||a + B s + C v|| <= t``."""
    from ._barrier import SOC, ConicProblem, barrier_solve

    scale = max(np.linalg.norm(a), np.abs(B).max(initial=0.0), np.abs(C).max(initial=0.0))
    if scale == 0:
        return 0.0
    a_, B_, C_ = a / scale, B / scale, C / scale
    kb, kc = B.shape[1], C.shape[1]
    nv = kb + kc + 1
    q = np.zeros(nv)
    q[-1] = 1.0
    G = np.zeros((2 * kb, nv))
    G[:kb, :kb] = np.eye(kb)
    G[kb:, :kb] = -np.eye(kb)
    et = np.zeros(nv)
    et[-1] = 1.0
    cones = [
        SOC(F=np.hstack([B_, C_, np.zeros((a.shape[0], 1))]), g=a_, c=et, e=0.0),
        SOC(F=np.hstack([np.zeros((kc, kb)), np.eye(kc), np.zeros((kc, 1))]), g=np.zeros(kc), c=np.zeros(nv), e=1.0),
    ]
    prob = ConicProblem(P=None, q=q, G=G if kb else None, h=np.ones(2 * kb) if kb else None, cones=cones)
    z0 = np.zeros(nv)
    z0[-1] = np.linalg.norm(a_) + 1.0
    try:
        br = barrier_solve(prob, z0, gap_tol=1e-14)
        sig = np.clip(br.z[:kb], -1.0, 1.0)
        v = br.z[kb : kb + kc]
        nv_ = np.linalg.norm(v)
        if nv_ > 1.0:
            v = v / nv_
        val = float(np.linalg.norm(a + B @ sig + C @ v))
    except ValueError:
        val = np.inf
    return min(val, _mixed_fista(a, B, C, iters=2000))


def min_norm_selection(a: ArrayLike, box_cols: ArrayLike | None = None, ball_cols: ArrayLike | None = None) -> float:
    """``min ||a + B sigma + C v||`` over ``sigma in [-1,1]^k`` and ``||v||_2 <= 1``."""
    a = np.asarray(a, dtype=float)
    B = None if box_cols is None else np.asarray(box_cols, dtype=float).reshape(a.shape[0], -1)
    C = None if ball_cols is None else np.asarray(ball_cols, dtype=float).reshape(a.shape[0], -1)
    has_b = B is not None and B.shape[1] > 0
    has_c = C is not None and C.shape[1] > 0
    if not has_b and not has_c:
        return float(np.linalg.norm(a))
    if has_b and not has_c:
        return _box_only(a, B)
    if has_c and not has_b:
        return _ball_only(a, C)
    return _mixed(a, B, C)


def _design(D: Dataset, S: ArrayLike | None) -> tuple[np.ndarray, np.ndarray | None]:
    if S is None:
        return D.X, None
    S = np.asarray(S, dtype=float)
    return D.X @ S.T, S.T


def adv_subgradient_parts(
    beta: ArrayLike,
    D: Dataset,
    cfg: AdvConfig,
    S: ArrayLike | None = None,
    zero_tol: float = DEFAULT_ZERO_TOL,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split the subdifferential of the adversarial risk at ``beta``.

    Returns ``(a, B, C)``: the fixed part, box-selection columns (zero
    residuals, zero coordinates of an l1 regulariser) and ball-selection
    columns (an l2 regulariser at the origin).  With a linear map ``S`` the
    coefficient vector is ``theta`` and the regulariser acts on ``S.T @ theta``.
    """
    if cfg.attack is NormKind.L1:
        raise ValueError("certificates are implemented for L2 and Linf attacks")
    Z, M = _design(D, S)
    beta = np.asarray(beta, dtype=float).ravel()
    n = D.n
    r = D.y - Z @ beta
    w = beta if M is None else M @ beta
    Nw = norm(w, cfg.regularizer)
    L = np.abs(r) + cfg.delta * Nw
    Ltot = float(L.sum())

    rtol = zero_tol * max(1.0, float(np.abs(D.y).max()))
    zero_r = np.abs(r) <= rtol
    a = -(2.0 / n) * (Z[~zero_r].T @ (L[~zero_r] * np.sign(r[~zero_r])))
    box = [(2.0 / n) * Z[zero_r & (L > 0)].T * L[zero_r & (L > 0)]]
    ball = []

    kappa = (2.0 / n) * cfg.delta * Ltot
    if kappa > 0:
        MT = np.eye(w.shape[0]) if M is None else M.T
        wscale = max(1.0, float(np.abs(w).max(initial=0.0)))
        if cfg.attack is NormKind.Linf:
            kink = np.abs(w) <= zero_tol * wscale * 1e-3
            a = a + kappa * (MT[:, ~kink] @ np.sign(w[~kink]))
            box.append(kappa * MT[:, kink])
        else:
            nw = np.linalg.norm(w)
            if nw <= zero_tol * 1e-3:
                ball.append(kappa * MT)
            else:
                a = a + kappa * (MT @ (w / nw))
    p = a.shape[0]
    B = np.hstack(box) if box else np.zeros((p, 0))
    C = np.hstack(ball) if ball else np.zeros((p, 0))
    return a, B, C


def optimality_residual(
    beta: ArrayLike,
    D: Dataset,
    cfg: AdvConfig,
    S: ArrayLike | None = None,
    zero_tol: float = DEFAULT_ZERO_TOL,
) -> float:
    """Upper bound on ``dist(0, d R_adv(beta))`` via the minimum-norm subgradient selection.

    Residuals with ``|r_i| <= zero_tol * max(1, ||y||_inf)`` are treated as
    zeros (free sign ``sigma_i in [-1, 1]``).  Exact for Linf attacks; for L2
    attacks the ball selection at the origin is solved through the secular
    equation.
    """
    a, B, C = adv_subgradient_parts(beta, D, cfg, S=S, zero_tol=zero_tol)
    return min_norm_selection(a, B, C)


def lasso_kkt_residual(beta: ArrayLike, D: Dataset, lam: float, zero_tol: float = 0.0) -> float:
    """Subgradient residual of ``(1/n)||y - X b||^2 + lam ||b||_1`` at ``beta`` (Euclidean norm)."""
    beta = np.asarray(beta, dtype=float).ravel()
    grad = -(2.0 / D.n) * (D.X.T @ (D.y - D.X @ beta))
    kink = np.abs(beta) <= zero_tol
    out = np.empty_like(grad)
    out[~kink] = grad[~kink] + lam * np.sign(beta[~kink])
    out[kink] = np.maximum(np.abs(grad[kink]) - lam, 0.0)
    return float(np.linalg.norm(out))


def sqrt_lasso_residual(beta: ArrayLike, D: Dataset, lam: float, zero_tol: float = DEFAULT_ZERO_TOL) -> float:
    """Subgradient residual of ``sqrt((1/n)||y - X b||^2) + lam ||b||_1``."""
    beta = np.asarray(beta, dtype=float).ravel()
    n = D.n
    r = D.y - D.X @ beta
    nr = np.linalg.norm(r)
    kink = beta == 0
    a = np.zeros(D.p)
    a[~kink] += lam * np.sign(beta[~kink])
    B = lam * np.eye(D.p)[:, kink]
    if nr > zero_tol * max(1.0, float(np.abs(D.y).max())):
        a -= D.X.T @ r / (np.sqrt(n) * nr)
        return min_norm_selection(a, B, None)
    return min_norm_selection(a, B, -D.X.T / np.sqrt(n))


def ridge_gradient_norm(beta: ArrayLike, D: Dataset, lam: float) -> float:
    beta = np.asarray(beta, dtype=float).ravel()
    g = -(2.0 / D.n) * (D.X.T @ (D.y - D.X @ beta)) + 2.0 * lam * beta
    return float(np.linalg.norm(g))


def modified_objective_residual(
    beta: ArrayLike, D: Dataset, cfg: AdvConfig, offset: float, zero_tol: float = DEFAULT_ZERO_TOL
) -> float:
    """Residual of ``(1/n)||y - X b||^2 + (delta ||b||_* + offset)^2`` at ``beta``."""
    beta = np.asarray(beta, dtype=float).ravel()
    n = D.n
    a = -(2.0 / n) * (D.X.T @ (D.y - D.X @ beta))
    Nb = norm(beta, cfg.regularizer)
    kappa = 2.0 * (cfg.delta * Nb + offset) * cfg.delta
    if kappa == 0:
        return float(np.linalg.norm(a))
    bscale = max(1.0, float(np.abs(beta).max(initial=0.0)))
    if cfg.attack is NormKind.Linf:
        kink = np.abs(beta) <= zero_tol * bscale * 1e-3
        a = a + kappa * np.sign(beta) * (~kink)
        return min_norm_selection(a, kappa * np.eye(D.p)[:, kink], None)
    nb = np.linalg.norm(beta)
    if nb <= zero_tol * 1e-3:
        return min_norm_selection(a, None, kappa * np.eye(D.p))
    return float(np.linalg.norm(a + kappa * beta / nb))
