"""Minimum-norm interpolators and the dual problem that certifies them.

The regulariser of adversarial training is the dual of the attack norm, so
``min_norm_interpolator(D, attack)`` minimises ``||beta||_{dual(attack)}``
subject to ``X @ beta = y``.  Its optimal value equals the value of

    max  alpha @ y   s.t.  ||X.T @ alpha||_attack <= 1,

which :func:`solve_dual_certificate` solves independently (closed form for
L2, an interior-point LP for Linf).
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
from numpy.typing import ArrayLike

from ..norms import Dataset, NormKind, as_norm_kind, norm
from ._lp import lp_ipm
from ._types import DualCertificate, FitResult, RankDeficientError, SolverOptions

__all__ = [
    "check_full_row_rank",
    "min_norm_interpolator",
    "solve_dual_certificate",
    "basis_pursuit_admm",
    "min_l1_from_lp",
    "dual_certificate_linmap",
    "min_norm_interpolator_linmap",
]

RANK_TOL = 1e-10


def check_full_row_rank(X: np.ndarray) -> None:
    n, p = X.shape
    if n > p:
        raise RankDeficientError(f"interpolation needs n <= p, got n={n}, p={p}")
    sig = np.linalg.svd(X, compute_uv=False)
    if sig[0] == 0 or sig[-1] < RANK_TOL * sig[0]:
        raise RankDeficientError("X does not have full row rank")


def _row_space_qr(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # X.T = Q R with Q (p x n), R (n x n) upper triangular
    Q, R = np.linalg.qr(X.T, mode="reduced")
    return Q, R


def _min_l2(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    Q, R = _row_space_qr(X)
    return Q @ sla.solve_triangular(R, y, trans="T")


def _l2_dual(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    _, R = _row_space_qr(X)
    c = sla.solve_triangular(R, y, trans="T")  # R^{-T} y
    nc = np.linalg.norm(c)
    if nc == 0:
        return np.zeros_like(y)
    return sla.solve_triangular(R, c / nc)


def _linf_dual_lp(X: np.ndarray, y: np.ndarray, extra: np.ndarray | None = None):
    """LP ``max y @ alpha  s.t. |X.T @ alpha + extra @ nu| <= 1`` (``nu`` free, optional)."""
    n = X.shape[0]
    A = X.T if extra is None else np.hstack([X.T, extra])
    G = np.vstack([A, -A])
    c = np.concatenate([-y, np.zeros(A.shape[1] - n)])
    res = lp_ipm(c, G, np.ones(G.shape[0]))
    return res, A


def _polish_linf_dual(X: np.ndarray, y: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    # snap to the vertex defined by the nearly-active constraints
    v = X.T @ alpha
    active = np.abs(v) >= 1.0 - 1e-7
    if active.sum() < X.shape[0]:
        return alpha
    XA = X[:, active]
    cand, *_ = np.linalg.lstsq(XA.T, np.sign(v[active]), rcond=None)
    if np.abs(X.T @ cand).max() <= 1.0 + 1e-12 and cand @ y >= alpha @ y - 1e-12 * max(1.0, abs(alpha @ y)):
        return cand
    return alpha


def solve_dual_certificate(D: Dataset, attack: NormKind | str) -> DualCertificate:
    """Solve ``max alpha @ y  s.t.  ||X.T @ alpha||_attack <= 1``.

    Requires full row rank (otherwise the problem can be unbounded).  The
    returned ``alpha`` is scaled back onto the feasible set if rounding
    pushed it out.
    """
    attack = as_norm_kind(attack)
    if attack is NormKind.L1:
        raise ValueError("dual certificates are implemented for L2 and Linf attacks")
    X, y = D.X, D.y
    check_full_row_rank(X)
    if not np.any(y):
        return DualCertificate(np.zeros(D.n), 0.0, 0.0, attack, 0)
    iters = 0
    if attack is NormKind.L2:
        alpha = _l2_dual(X, y)
    else:
        res, _ = _linf_dual_lp(X, y)
        iters = res.iterations
        alpha = _polish_linf_dual(X, y, res.x)
    cn = norm(X.T @ alpha, attack)
    if cn > 1.0:
        alpha = alpha / cn
        cn = norm(X.T @ alpha, attack)
    return DualCertificate(alpha, cn, float(alpha @ y), attack, iters)


def min_l1_from_lp(D: Dataset) -> np.ndarray:
    """Minimum-l1 interpolator read off the multipliers of the Linf dual LP.

    The LP multipliers ``z+``, ``z-`` satisfy ``X (z+ - z-) = y`` and
    ``sum(z) = optimal value``; this is an independent route to basis pursuit.
    """
    check_full_row_rank(D.X)
    res, _ = _linf_dual_lp(D.X, D.y)
    p = D.p
    return res.z[:p] - res.z[p:]


def _purify(X: np.ndarray, y: np.ndarray, beta: np.ndarray, tol: float) -> np.ndarray:
    """Move a feasible point to a vertex without increasing its l1 norm."""
    beta = beta.copy()
    beta[np.abs(beta) <= tol] = 0.0
    for _ in range(beta.shape[0]):
        S = np.flatnonzero(beta)
        if S.size == 0:
            break
        XS = X[:, S]
        _, sig, Vt = np.linalg.svd(XS, full_matrices=True)
        rank = int(np.sum(sig > RANK_TOL * sig[0])) if sig.size else 0
        if rank == S.size:
            break
        d = Vt[rank]
        slope = float(np.sign(beta[S]) @ d)
        if slope > 0:
            d = -d
        # largest step before a coordinate changes sign
        ratios = np.where(d * np.sign(beta[S]) < 0, -beta[S] / np.where(d == 0, 1.0, d), np.inf)
        k = int(np.argmin(ratios))
        if not np.isfinite(ratios[k]):
            break
        beta[S] += ratios[k] * d
        beta[S[k]] = 0.0
    S = np.flatnonzero(beta)
    if S.size:
        # unique on a vertex; re-solving removes drift from the steps above
        beta[S] = np.linalg.lstsq(X[:, S], y, rcond=None)[0]
    return beta


def basis_pursuit_admm(
    X: np.ndarray,
    y: np.ndarray,
    lower_bound: float,
    max_iterations: int = 200_000,
    feas_tol: float = 1e-10,
    gap_tol: float = 1e-8,
    polish_every: int = 25,
) -> tuple[np.ndarray, int, float]:
    """ADMM for ``min ||b||_1  s.t.  X b = y``.

    ``lower_bound`` is a dual value (``alpha @ y`` for a feasible ``alpha``).
    Every ``polish_every`` iterations the support of the iterate is
    purified to a vertex and solved exactly; iteration stops once a feasible
    point is within ``gap_tol`` (relative) of the bound.  Returns
    ``(beta, iterations, relative_gap)``.
    """
    n, p = X.shape
    Q, R = _row_space_qr(X)

    def project(v: np.ndarray) -> np.ndarray:
        return v - Q @ sla.solve_triangular(R, X @ v - y, trans="T")

    ynorm = max(1.0, float(np.abs(y).max()))
    x = project(np.zeros(p))
    z = x.copy()
    u = np.zeros(p)
    rho = 1.0 / max(np.abs(x).max(), 1e-12)
    best = x.copy()
    best_gap = np.inf
    scale = max(abs(lower_bound), 1e-300)

    def consider(b: np.ndarray) -> float:
        nonlocal best, best_gap
        viol = np.abs(X @ b - y).max()
        if viol > feas_tol * (1.0 + ynorm):
            return np.inf
        gap = (np.abs(b).sum() - lower_bound) / scale
        if gap < best_gap:
            best, best_gap = b.copy(), gap
        return gap

    consider(x)
    it = 0
    for it in range(1, max_iterations + 1):
        x = project(z - u)
        z_old = z
        z = np.sign(x + u) * np.maximum(np.abs(x + u) - 1.0 / rho, 0.0)
        u = u + x - z
        if it % polish_every == 0:
            rp = np.linalg.norm(x - z)
            rd = rho * np.linalg.norm(z - z_old)
            cand = _purify(X, y, z, 1e-9 * max(1e-300, np.abs(z).max()))
            if consider(cand) <= gap_tol or consider(x) <= gap_tol:
                break
            # residual balancing; u is the scaled dual so rescale it with rho
            if rp > 10 * rd:
                rho *= 2.0
                u /= 2.0
            elif rd > 10 * rp:
                rho /= 2.0
                u *= 2.0
    # report a vertex even when a non-vertex optimum was hit first
    vert = _purify(X, y, best, 1e-12 * max(1e-300, np.abs(best).max()))
    if np.abs(X @ vert - y).max() <= feas_tol * (1.0 + ynorm) and np.abs(vert).sum() <= np.abs(best).sum() * (1 + 1e-12):
        best = vert
        best_gap = (np.abs(best).sum() - lower_bound) / scale
    return best, it, float(best_gap)


def min_norm_interpolator(D: Dataset, attack: NormKind | str, opts: SolverOptions | None = None) -> FitResult:
    """Smallest ``||beta||_{dual(attack)}`` among solutions of ``X @ beta = y``.

    L2 attack: minimum Euclidean-norm solution (row-space projection).
    Linf attack: basis pursuit by ADMM, finished on a vertex of the feasible
    polytope.  ``certificate_residual`` is the relative duality gap against
    :func:`solve_dual_certificate`.
    """
    attack = as_norm_kind(attack)
    opts = opts or SolverOptions()
    X, y = D.X, D.y
    check_full_row_rank(X)
    dual = solve_dual_certificate(D, attack)
    if attack is NormKind.L2:
        beta = _min_l2(X, y)
        iters = 1
    elif attack is NormKind.Linf:
        if not np.any(y):
            beta, iters = np.zeros(D.p), 0
        else:
            beta, iters, _ = basis_pursuit_admm(X, y, dual.objective, max_iterations=opts.max_iterations)
    else:
        raise ValueError("min_norm_interpolator supports L2 and Linf attacks")
    val = norm(beta, attack.dual)
    gap = abs(val - dual.objective) / max(abs(dual.objective), 1e-300) if dual.objective else val
    viol = float(np.abs(X @ beta - y).max())
    feasible = viol <= 1e-8 * (1.0 + float(np.abs(y).max()))
    return FitResult(
        beta,
        val,
        float(gap),
        iters,
        bool(feasible and gap <= 1e-6),
        method="min-norm-" + attack.dual.value,
        info={"dual_objective": dual.objective, "constraint_violation": viol},
    )


def _null_basis(S: np.ndarray) -> np.ndarray:
    _, sig, Vt = np.linalg.svd(S, full_matrices=True)
    rank = int(np.sum(sig > RANK_TOL * sig[0])) if sig.size else 0
    return Vt[rank:].T


def dual_certificate_linmap(D: Dataset, S: ArrayLike, attack: NormKind | str) -> DualCertificate:
    """Dual problem for inputs mapped by ``S`` (p x d, with d = columns of X).

    The feasible set is ``{alpha : min_{mu in null(S)} ||X.T @ alpha - mu||_attack <= 1}``;
    for L2 this is ``||P X.T alpha||_2 <= 1`` with ``P`` the projector onto
    the row space of ``S``.  ``constraint_norm`` reports that minimum.
    """
    attack = as_norm_kind(attack)
    S = np.asarray(S, dtype=float)
    X, y = D.X, D.y
    Z = X @ S.T
    check_full_row_rank(Z)
    N = _null_basis(S)
    if not np.any(y):
        return DualCertificate(np.zeros(D.n), 0.0, 0.0, attack, 0)
    if attack is NormKind.L2:
        Qs, _ = np.linalg.qr(S.T, mode="reduced")
        alpha = _l2_dual(X @ Qs, y)
        cn = float(np.linalg.norm(Qs.T @ (X.T @ alpha)))
        iters = 0
    elif attack is NormKind.Linf:
        res, A = _linf_dual_lp(X, y, extra=N if N.shape[1] else None)
        alpha = res.x[: D.n]
        nu = res.x[D.n :]
        cn = float(np.abs(A @ np.concatenate([alpha, nu])).max())
        iters = res.iterations
    else:
        raise ValueError("dual certificates are implemented for L2 and Linf attacks")
    if cn > 1.0:
        alpha = alpha / cn
        cn = 1.0
    return DualCertificate(alpha, cn, float(alpha @ y), attack, iters)


def min_norm_interpolator_linmap(D: Dataset, S: ArrayLike, attack: NormKind | str) -> FitResult:
    """Smallest ``||S.T @ theta||_{dual(attack)}`` with ``X @ S.T @ theta = y``."""
    attack = as_norm_kind(attack)
    S = np.asarray(S, dtype=float)
    X, y = D.X, D.y
    Z = X @ S.T
    check_full_row_rank(Z)
    dual = dual_certificate_linmap(D, S, attack)
    if attack is NormKind.L2:
        Qs, _ = np.linalg.qr(S.T, mode="reduced")
        gamma = _min_l2(X @ Qs, y)
        b = Qs @ gamma
        iters = 1
    else:
        N = _null_basis(S)
        res, _ = _linf_dual_lp(X, y, extra=N if N.shape[1] else None)
        b = res.z[: D.p] - res.z[D.p :]
        iters = res.iterations
    theta = np.linalg.lstsq(S.T, b, rcond=None)[0]
    val = norm(S.T @ theta, attack.dual)
    gap = abs(val - dual.objective) / max(abs(dual.objective), 1e-300) if dual.objective else val
    viol = float(np.abs(Z @ theta - y).max())
    return FitResult(
        theta,
        val,
        float(gap),
        iters,
        bool(viol <= 1e-8 * (1.0 + float(np.abs(y).max())) and gap <= 1e-6),
        method="min-norm-linmap-" + attack.dual.value,
        info={"dual_objective": dual.objective, "constraint_violation": viol},
    )
