"""Dense Mehrotra predictor-corrector method for inequality-form LPs.

    minimize  c @ x   subject to  G @ x <= h

with ``h > 0`` so that ``x = 0`` is strictly feasible.  Returns the primal
``x``, slacks ``s`` and multipliers ``z >= 0`` (``G.T @ z = -c`` at optimum).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla


@dataclass
class LPResult:
    x: np.ndarray
    s: np.ndarray
    z: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    complementarity: float
    converged: bool


def _step_to_boundary(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def lp_ipm(
    c: np.ndarray,
    G: np.ndarray,
    h: np.ndarray,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> LPResult:
    c = np.asarray(c, dtype=float)
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    m, nvar = G.shape
    if np.any(h <= 0):
        raise ValueError("lp_ipm expects h > 0 (origin strictly feasible)")
    x = np.zeros(nvar)
    s = h.copy()
    z = np.ones(m)
    scale_c = 1.0 + np.abs(c).max(initial=0.0)
    scale_h = 1.0 + np.abs(h).max()
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        rd = c + G.T @ z
        rp = G @ x + s - h
        gap = float(s @ z)
        mu = gap / m
        pres = float(np.abs(rp).max(initial=0.0)) / scale_h
        dres = float(np.abs(rd).max(initial=0.0)) / scale_c
        comp = gap / (1.0 + abs(float(c @ x)))
        if pres <= tol and dres <= tol and comp <= tol:
            converged = True
            break
        d = z / s
        K = G.T @ (d[:, None] * G)
        try:
            fac = sla.cho_factor(K, check_finite=False)

            def lin(rhs: np.ndarray) -> np.ndarray:
                return sla.cho_solve(fac, rhs, check_finite=False)

        except (np.linalg.LinAlgError, sla.LinAlgError):
            Kp = np.linalg.pinv(K, hermitian=True)

            def lin(rhs: np.ndarray) -> np.ndarray:
                return Kp @ rhs

        def direction(rc: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
            dx = lin(-rd - G.T @ ((rc + z * rp) / s))
            ds = -rp - G @ dx
            dz = (rc - z * ds) / s
            return dx, ds, dz

        # predictor
        dx_a, ds_a, dz_a = direction(-s * z)
        ap = _step_to_boundary(s, ds_a)
        ad = _step_to_boundary(z, dz_a)
        mu_aff = float((s + ap * ds_a) @ (z + ad * dz_a)) / m
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        # corrector
        dx, ds, dz = direction(-s * z - ds_a * dz_a + sigma * mu)
        ap = min(1.0, 0.995 * _step_to_boundary(s, ds))
        ad = min(1.0, 0.995 * _step_to_boundary(z, dz))
        x = x + ap * dx
        s = s + ap * ds
        z = z + ad * dz
        s = np.maximum(s, 1e-300)
        z = np.maximum(z, 1e-300)
    rd = c + G.T @ z
    rp = G @ x + s - h
    return LPResult(
        x=x,
        s=s,
        z=z,
        iterations=it,
        primal_residual=float(np.abs(rp).max(initial=0.0)),
        dual_residual=float(np.abs(rd).max(initial=0.0)),
        complementarity=float(s @ z),
        converged=converged,
    )
