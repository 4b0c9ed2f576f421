"""Log-barrier interior-point method for small dense conic programs.

Solves::

    minimize    0.5 * z @ P @ z + q @ z
    subject to  G @ z <= h
                ||F_k @ z + g_k||_2 <= c_k @ z + e_k      (second-order cones)

by following the central path of ``tau * f(z) + barrier(z)`` with damped
Newton steps.  Problems here have a few hundred variables, so every Newton
system is formed and factored densely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp


@dataclass
class SOC:
    F: np.ndarray
    g: np.ndarray
    c: np.ndarray
    e: float = 0.0


@dataclass
class ConicProblem:
    P: np.ndarray | None
    q: np.ndarray
    G: sp.spmatrix | np.ndarray | None = None  # stored dense
    h: np.ndarray | None = None
    cones: list[SOC] = field(default_factory=list)
    # optional structured solver: (z, tau) -> (gradient, Newton step)
    newton: Callable[[np.ndarray, float], tuple[np.ndarray, np.ndarray]] | None = None

    def __post_init__(self) -> None:
        if self.G is not None:
            # dense BLAS beats sparse products at the sizes handled here
            G = self.G.toarray() if sp.issparse(self.G) else np.asarray(self.G, dtype=float)
            self.G = np.ascontiguousarray(G)
            self.h = np.asarray(self.h, dtype=float)

    @property
    def nvar(self) -> int:
        return self.q.shape[0]

    @property
    def barrier_degree(self) -> int:
        m = 0 if self.G is None else self.G.shape[0]
        return m + 2 * len(self.cones)

    def objective(self, z: np.ndarray) -> float:
        val = float(self.q @ z)
        if self.P is not None:
            val += 0.5 * float(z @ (self.P @ z))
        return val

    def slacks(self, z: np.ndarray) -> tuple[np.ndarray, list[tuple[float, np.ndarray]]]:
        s = np.empty(0) if self.G is None else self.h - self.G @ z
        cone_vals = [(float(k.c @ z + k.e), k.F @ z + k.g) for k in self.cones]
        return s, cone_vals

    def strictly_feasible(self, z: np.ndarray) -> bool:
        s, cv = self.slacks(z)
        if s.size and not np.all(s > 0):
            return False
        return all(a > 0 and a * a - w @ w > 0 for a, w in cv)

    def barrier(self, z: np.ndarray) -> float:
        s, cv = self.slacks(z)
        val = -float(np.sum(np.log(s))) if s.size else 0.0
        for a, w in cv:
            val -= np.log(a * a - w @ w)
        return val

    def barrier_derivatives(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = self.nvar
        grad = np.zeros(n)
        hess = np.zeros((n, n))
        if self.G is not None:
            s = self.h - self.G @ z
            inv = 1.0 / s
            grad += self.G.T @ inv
            GD = self.G * inv[:, None]
            hess += GD.T @ GD
        for k in self.cones:
            a = float(k.c @ z + k.e)
            w = k.F @ z + k.g
            Q = a * a - w @ w
            dQ = 2.0 * a * k.c - 2.0 * (k.F.T @ w)
            grad -= dQ / Q
            hess += (2.0 * (k.F.T @ k.F) - 2.0 * np.outer(k.c, k.c)) / Q + np.outer(dQ, dQ) / (Q * Q)
        return grad, hess


@dataclass
class BarrierResult:
    z: np.ndarray
    objective: float
    gap_bound: float
    newton_steps: int
    converged: bool


def _max_step(prob: ConicProblem, z: np.ndarray, dz: np.ndarray) -> float:
    if prob.G is None:
        return np.inf
    s = prob.h - prob.G @ z
    Gd = prob.G @ dz
    pos = Gd > 0
    if not np.any(pos):
        return np.inf
    return float(np.min(s[pos] / Gd[pos]))


def _newton_direction(H: np.ndarray, grad: np.ndarray) -> np.ndarray:
    try:
        cf = sla.cho_factor(H, check_finite=False)
        dz = -sla.cho_solve(cf, grad, check_finite=False)
        if np.all(np.isfinite(dz)):
            return dz
    except (np.linalg.LinAlgError, sla.LinAlgError):
        pass
    # badly conditioned late in the path: symmetric eigen-solve with a floor
    w, V = np.linalg.eigh(H)
    floor = max(w.max(), 1.0) * 1e-15
    return -(V @ ((V.T @ grad) / np.maximum(w, floor)))


def barrier_solve(
    prob: ConicProblem,
    z0: np.ndarray,
    gap_tol: float = 1e-10,
    max_newton: int = 2000,
    mu: float = 20.0,
    tau0: float | None = None,
) -> BarrierResult:
    """Follow the central path from a strictly feasible ``z0`` until the gap bound is below ``gap_tol``."""
    z = np.array(z0, dtype=float)
    if not prob.strictly_feasible(z):
        raise ValueError("barrier_solve needs a strictly feasible starting point")
    theta = max(prob.barrier_degree, 1)
    if tau0 is None:
        tau0 = theta / max(abs(prob.objective(z)), 1.0)
    tau = float(tau0)
    steps = 0
    P = prob.P

    while True:
        # loose centering on intermediate levels, tight on the last one
        final = theta / tau <= gap_tol
        center_tol = 2e-12 if final else 1e-6
        for _ in range(60):
            if prob.newton is not None:
                grad, dz = prob.newton(z, tau)
            else:
                g_b, H_b = prob.barrier_derivatives(z)
                grad = tau * prob.q + g_b
                H = H_b
                if P is not None:
                    grad = grad + tau * (P @ z)
                    H = H + tau * P
                dz = _newton_direction(H, grad)
            lam2 = float(-grad @ dz)
            steps += 1
            if lam2 <= center_tol or steps >= max_newton:
                break
            t = min(1.0, 0.99 * _max_step(prob, z, dz))
            phi0 = tau * prob.objective(z) + prob.barrier(z)
            slope = float(grad @ dz)
            accepted = False
            for _ls in range(60):
                zn = z + t * dz
                if prob.strictly_feasible(zn):
                    phin = tau * prob.objective(zn) + prob.barrier(zn)
                    if phin <= phi0 + 0.25 * t * slope or (t < 1e-12):
                        accepted = True
                        break
                t *= 0.5
            if not accepted:
                break
            stalled = t * float(np.linalg.norm(dz)) <= 1e-14 * (1.0 + float(np.linalg.norm(z)))
            z = zn
            # rounding noise can keep lam2 above the tolerance once steps vanish
            if (lam2 <= 1e-9 and t == 1.0) or stalled:
                break
        gap = theta / tau
        if gap <= gap_tol or steps >= max_newton:
            return BarrierResult(z, prob.objective(z), gap, steps, gap <= gap_tol)
        tau *= mu
