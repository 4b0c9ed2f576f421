"""Adversarial training solver.

The objective ``(1/n) sum (|y_i - z_i @ theta| + delta ||M theta||_*)**2`` is
written in epigraph form (``u_i >= |r_i|``, ``w >= |M theta|`` or
``t >= ||M theta||_2``) and minimised with a log-barrier interior-point
method.  The interior iterate is then polished: the sets of zero residuals
and zero regulariser coordinates are guessed from the iterate, the smooth
problem on that face is solved exactly, and the candidate is accepted only if
the subgradient certificate confirms it.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from numpy.typing import ArrayLike

from ..adversarial import AdvConfig
from ..norms import Dataset, NormKind, norm
from ._barrier import _newton_direction, SOC, ConicProblem, barrier_solve
from ._types import FitResult, SolverOptions
from .certificate import optimality_residual

__all__ = ["solve_adv", "solve_adv_linmap", "adv_objective"]

_POLISH_THRESHOLDS = (1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)


def adv_objective(theta: np.ndarray, Z: np.ndarray, y: np.ndarray, M: np.ndarray | None, cfg: AdvConfig) -> float:
    w = theta if M is None else M @ theta
    r = y - Z @ theta
    return float(np.mean((np.abs(r) + cfg.delta * norm(w, cfg.regularizer)) ** 2))


def _build_problem(Z: np.ndarray, y: np.ndarray, M: np.ndarray, cfg: AdvConfig) -> tuple[ConicProblem, np.ndarray]:
    n, p = Z.shape
    d = M.shape[0]
    delta = cfg.delta
    I_n = sp.identity(n, format="csr")
    Zs = sp.csr_matrix(Z)
    if cfg.attack is NormKind.Linf:
        Ms = sp.csr_matrix(M)
        I_d = sp.identity(d, format="csr")
        G = sp.bmat(
            [
                [Zs, -I_n, None],
                [-Zs, -I_n, None],
                [Ms, None, -I_d],
                [-Ms, None, -I_d],
            ],
            format="csr",
        )
        h = np.concatenate([y, -y, np.zeros(2 * d)])
        A = np.hstack([np.zeros((n, p)), np.eye(n), delta * np.ones((n, d))])
        z0 = np.concatenate([np.zeros(p), np.abs(y) + 1.0, np.ones(d)])
        cones: list[SOC] = []
    else:
        G = sp.bmat([[Zs, -I_n, None], [-Zs, -I_n, None]], format="csr")
        # the t column is absent from G; pad it
        G = sp.hstack([G, sp.csr_matrix((2 * n, 1))], format="csr")
        h = np.concatenate([y, -y])
        A = np.hstack([np.zeros((n, p)), np.eye(n), delta * np.ones((n, 1))])
        nv = p + n + 1
        F = np.hstack([M, np.zeros((d, n + 1))])
        c = np.zeros(nv)
        c[-1] = 1.0
        cones = [SOC(F=F, g=np.zeros(d), c=c, e=0.0)]
        z0 = np.concatenate([np.zeros(p), np.abs(y) + 1.0, [1.0]])
    P = (2.0 / n) * (A.T @ A)
    prob = ConicProblem(P=P, q=np.zeros(P.shape[0]), G=G, h=h, cones=cones, newton=_schur_newton(Z, y, M, cfg))
    return prob, z0


def _schur_newton(Z: np.ndarray, y: np.ndarray, M: np.ndarray, cfg: AdvConfig):
    """Newton steps for the epigraph problem with the diagonal ``u`` block eliminated.

    Variables are ``[theta, u, v]`` with ``v = w`` (Linf attack) or the scalar
    cone height (L2 attack).  The reduced system has size ``p + len(v)``.
    """
    n, p = Z.shape
    d = M.shape[0]
    delta = cfg.delta
    linf = cfg.attack is NormKind.Linf
    k = d if linf else 1
    MtM = None if linf else M.T @ M

    def step(z: np.ndarray, tau: float) -> tuple[np.ndarray, np.ndarray]:
        th, u, v = z[:p], z[p : p + n], z[p + n :]
        Zt = Z @ th
        i1 = 1.0 / (y - Zt + u)
        i2 = 1.0 / (Zt - y + u)
        a = u + delta * v.sum()
        c = 2.0 * tau / n
        # gradient of tau * objective + barrier
        g_th = Z.T @ (i1 - i2)
        g_u = c * a - (i1 + i2)
        g_v = np.full(k, c * delta * a.sum())
        H_thth = (Z.T * (i1**2 + i2**2)) @ Z
        H_vv = np.full((k, k), c * delta * delta * n)
        H_thv = np.zeros((p, k))
        if linf:
            Mt = M @ th
            i3 = 1.0 / (v - Mt)
            i4 = 1.0 / (v + Mt)
            g_th += M.T @ (i3 - i4)
            g_v -= i3 + i4
            H_thth += (M.T * (i3**2 + i4**2)) @ M
            H_vv[np.diag_indices(k)] += i3**2 + i4**2
            H_thv += M.T * (i4**2 - i3**2)
        else:
            Mt = M @ th
            t = float(v[0])
            Q = t * t - float(Mt @ Mt)
            dQ_th = -2.0 * (M.T @ Mt)
            dQ_t = 2.0 * t
            g_th -= dQ_th / Q
            g_v[0] -= dQ_t / Q
            H_thth += 2.0 * MtM / Q + np.outer(dQ_th, dQ_th) / (Q * Q)
            H_vv[0, 0] += -2.0 / Q + dQ_t * dQ_t / (Q * Q)
            H_thv[:, 0] += dQ_th * dQ_t / (Q * Q)
        h_uu = i1**2 + i2**2 + c
        H_uth = (i2**2 - i1**2)[:, None] * Z
        # u couples to every v entry through the same column c * delta * 1
        H_r = np.block([[H_thth, H_thv], [H_thv.T, H_vv]])
        g_r = np.concatenate([g_th, g_v])
        B = np.hstack([H_uth, np.full((n, k), c * delta)])
        Bs = B / h_uu[:, None]
        S = H_r - B.T @ Bs
        rhs = g_r - Bs.T @ g_u
        d_r = _newton_direction(S, rhs)
        d_u = -(g_u + B @ d_r) / h_uu
        grad = np.concatenate([g_th, g_u, g_v])
        return grad, np.concatenate([d_r[:p], d_u, d_r[p:]])

    return step


def _null_space_split(E: np.ndarray, e: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray] | None:
    if E.shape[0] == 0:
        return np.zeros(p), np.eye(p)
    U, sig, Vt = np.linalg.svd(E, full_matrices=True)
    tol = max(E.shape) * np.finfo(float).eps * (sig[0] if sig.size else 0.0) * 10
    rank = int(np.sum(sig > tol))
    theta_p = Vt[:rank].T @ ((U[:, :rank].T @ e) / sig[:rank])
    if np.linalg.norm(E @ theta_p - e) > 1e-9 * max(1.0, np.linalg.norm(e)):
        return None
    return theta_p, Vt[rank:].T


def _face_solve_l1(
    Z: np.ndarray, y: np.ndarray, M: np.ndarray, delta: float, I0: np.ndarray, J0: np.ndarray, s: np.ndarray, cvec: np.ndarray
) -> np.ndarray | None:
    """Exact minimiser on the face where the sign patterns are frozen (l1 regulariser)."""
    p = Z.shape[1]
    F = ~J0
    reg_row = cvec[F] @ M[F]  # c^T M_F, so the regulariser equals reg_row @ theta
    B = np.where(I0[:, None], 0.0, s[:, None] * Z) - delta * reg_row[None, :]
    a = np.where(I0, 0.0, s * y)
    E = np.vstack([Z[I0], M[J0]])
    e = np.concatenate([y[I0], np.zeros(int(J0.sum()))])
    split = _null_space_split(E, e, p)
    if split is None:
        return None
    theta_p, N = split
    if N.shape[1] == 0:
        return theta_p
    eta = np.linalg.lstsq(B @ N, a - B @ theta_p, rcond=None)[0]
    return theta_p + N @ eta


def _face_solve_l2(
    Z: np.ndarray, y: np.ndarray, M: np.ndarray, delta: float, I0: np.ndarray, s: np.ndarray, theta0: np.ndarray
) -> np.ndarray | None:
    """Newton's method on the face with zero residuals ``I0`` and ``M theta != 0``."""
    n, p = Z.shape
    split = _null_space_split(Z[I0], y[I0], p)
    if split is None:
        return None
    theta_p, N = split
    if N.shape[1] == 0:
        return theta_p
    eta = N.T @ (theta0 - theta_p)
    F = ~I0

    def parts(eta: np.ndarray):
        th = theta_p + N @ eta
        w = M @ th
        q = float(np.linalg.norm(w))
        ell = np.where(F, s * (y - Z @ th), 0.0) + delta * q
        return th, w, q, ell

    def fval(eta: np.ndarray) -> float:
        _, _, _, ell = parts(eta)
        return float(ell @ ell) / n

    for _ in range(100):
        th, w, q, ell = parts(eta)
        if q == 0:
            return None
        gq = M.T @ w / q
        Hq = (M.T @ M) / q - np.outer(gq, gq) / q
        J = np.where(F[:, None], -s[:, None] * Z, 0.0) + delta * gq[None, :]
        g = (2.0 / n) * (J.T @ ell)
        H = (2.0 / n) * (J.T @ J + delta * float(ell.sum()) * Hq)
        gN = N.T @ g
        HN = N.T @ H @ N
        if np.linalg.norm(gN) <= 1e-15 * max(1.0, float(ell @ ell)):
            break
        try:
            step = -np.linalg.solve(HN + 1e-14 * np.trace(HN) * np.eye(HN.shape[0]) / HN.shape[0], gN)
        except np.linalg.LinAlgError:
            return None
        f0 = fval(eta)
        t = 1.0
        while t > 1e-10 and fval(eta + t * step) > f0 + 1e-4 * t * float(gN @ step):
            t *= 0.5
        eta = eta + t * step
        if t * np.linalg.norm(step) <= 1e-15 * (1.0 + np.linalg.norm(eta)):
            break
    return theta_p + N @ eta


def _polish_candidates(theta: np.ndarray, Z: np.ndarray, y: np.ndarray, M: np.ndarray, cfg: AdvConfig) -> list[np.ndarray]:
    r = y - Z @ theta
    w = M @ theta
    rs = np.abs(r) / max(1.0, float(np.abs(y).max()))
    ws = np.abs(w) / max(1.0, float(np.abs(w).max(initial=0.0)))
    out: list[np.ndarray] = [np.zeros_like(theta)]
    s = np.where(r >= 0, 1.0, -1.0)
    seen: set[tuple[bytes, bytes]] = set()
    for thr in _POLISH_THRESHOLDS:
        I0 = rs <= thr
        if cfg.attack is NormKind.Linf:
            J0 = ws <= thr
        else:
            J0 = np.full(w.shape[0], np.linalg.norm(w) <= thr * max(1.0, np.linalg.norm(theta)))
        key = (I0.tobytes(), J0.tobytes())
        if key in seen:
            continue
        seen.add(key)
        if cfg.delta == 0:
            cand = None
        elif cfg.attack is NormKind.Linf or J0.all():
            cvec = np.sign(w)
            cand = _face_solve_l1(Z, y, M, cfg.delta if cfg.attack is NormKind.Linf else 0.0, I0, J0, s, cvec)
        else:
            cand = _face_solve_l2(Z, y, M, cfg.delta, I0, s, theta)
        if cand is not None and np.all(np.isfinite(cand)):
            out.append(cand)
    return out


def _solve(
    Z: np.ndarray,
    y: np.ndarray,
    M: np.ndarray | None,
    cfg: AdvConfig,
    opts: SolverOptions,
    D: Dataset,
    S: np.ndarray | None,
) -> FitResult:
    if cfg.attack is NormKind.L1:
        raise ValueError("solve_adv supports L2 and Linf attacks")
    n, p = Z.shape
    Mx = np.eye(p) if M is None else M

    def cert(theta: np.ndarray) -> float:
        return optimality_residual(theta, D, cfg, S=S)

    def obj(theta: np.ndarray) -> float:
        return adv_objective(theta, Z, D.y, M, cfg)

    if cfg.delta == 0:
        theta = np.linalg.lstsq(Z, D.y, rcond=None)[0]
        res = cert(theta)
        return FitResult(theta, obj(theta), res, 1, res <= opts.certificate_tolerance, method="lstsq")

    ys = float(np.abs(y).max())
    if ys == 0:
        theta = np.zeros(p)
        return FitResult(theta, 0.0, cert(theta), 0, True, method="zero")

    yn = y / ys
    prob, z0 = _build_problem(Z, yn, Mx, cfg)
    max_newton = max(1, min(opts.max_iterations, 5000))
    br = barrier_solve(prob, z0, gap_tol=opts.smoothing_floor, max_newton=max_newton)
    theta_b = br.z[:p] * ys

    cands = [theta_b] + [c * ys for c in _polish_candidates(br.z[:p], Z, yn, Mx, cfg)]
    # the minimiser has the smallest objective, so certify in objective order
    cands.sort(key=obj)
    tol = opts.certificate_tolerance
    best = None
    for c in cands:
        rc = cert(c)
        if best is None or rc < best[0]:
            best = (rc, obj(c), c)
        if rc <= tol:
            best = (rc, obj(c), c)
            break
    res, val, theta = best
    return FitResult(
        theta,
        val,
        res,
        br.newton_steps,
        res <= tol,
        method="barrier+polish",
        info={"gap_bound": br.gap_bound * ys * ys, "barrier_objective": br.objective * ys * ys, "candidates": len(cands)},
    )


def solve_adv(D: Dataset, cfg: AdvConfig, opts: SolverOptions | None = None) -> FitResult:
    """Minimise the adversarial risk ``(1/n) sum (|y_i - x_i @ b| + delta ||b||_*)**2``.

    ``delta == 0`` falls back to the minimum-norm least-squares solution.
    The returned ``converged`` flag is true exactly when the subgradient
    certificate is below ``opts.certificate_tolerance``; otherwise the best
    iterate found is returned.
    """
    opts = opts or SolverOptions()
    return _solve(D.X, D.y, None, cfg, opts, D, None)


def solve_adv_linmap(D: Dataset, S: ArrayLike, cfg: AdvConfig, opts: SolverOptions | None = None) -> FitResult:
    """Adversarial training of ``theta`` for predictions ``x @ S.T @ theta``.

    ``S`` is ``(p, d)`` with ``d`` the number of raw input columns of ``D.X``;
    the attack acts on raw inputs, so the regulariser is ``||S.T @ theta||_*``.
    """
    opts = opts or SolverOptions()
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[1] != D.p:
        raise ValueError(f"S must have shape (p, {D.p}), got {S.shape}")
    if not np.all(np.isfinite(S)):
        raise ValueError("S must be finite")
    return _solve(D.X @ S.T, D.y, S.T, cfg, opts, D, S)
