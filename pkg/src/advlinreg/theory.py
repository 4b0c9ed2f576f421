"""Thresholds, bounds and radius-selection rules for adversarial training.

Everything here is a small pure function of the data so that it can serve
as an oracle in tests:

* ``delta_bar``: largest radius for which the minimum-norm interpolator
  is still optimal, ``1 / (n ||alpha_hat||_inf)`` with ``alpha_hat`` the
  dual solution.
* ``zero_threshold``: smallest radius for which ``beta = 0`` is optimal.
* prediction-error and robustness-gap bounds, and the noise-scale-free
  radius choices.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike

from .adversarial import AdvConfig
from .norms import Dataset, NormKind, as_norm_kind, norm
from .solvers import (
    check_full_row_rank,
    dual_certificate_linmap,
    modified_objective_residual,
    solve_dual_certificate,
)

__all__ = [
    "ThresholdReport",
    "BoundReport",
    "ShrinkageReport",
    "delta_bar",
    "delta_bar_linmap",
    "delta_bar_bounds",
    "zero_threshold",
    "threshold_report",
    "reference_radius",
    "delta_star",
    "lasso_lambda_star",
    "prediction_bound_rhs",
    "lasso_bound_rhs",
    "adv_bound_report",
    "lasso_bound_report",
    "robustness_gap_bound",
    "pivotal_delta",
    "heuristic_delta",
    "heuristic_sqrt_lasso_lambda",
    "shrinkage_equiv_check",
]


@dataclass(frozen=True)
class ThresholdReport:
    """Interpolation and zero-solution thresholds for one dataset and attack norm.

    ``delta_bar_lower``/``delta_bar_upper`` are the singular-value bounds
    divided by ``n`` so that they bracket ``delta_bar`` itself.
    """

    delta_bar: float
    delta_bar_lower: float
    delta_bar_upper: float
    zero_threshold: float
    attack: NormKind


@dataclass(frozen=True)
class BoundReport:
    delta_star: float
    bound_rhs: float
    lhs_observed: float
    holds: bool = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "holds", bool(self.lhs_observed <= self.bound_rhs))


@dataclass(frozen=True)
class ShrinkageReport:
    conditions_met: bool
    modified_objective_residual: float
    near_binding: bool
    details: dict = field(default_factory=dict, compare=False)


def _attack(attack: NormKind | str) -> NormKind:
    attack = as_norm_kind(attack)
    if attack is NormKind.L1:
        raise ValueError("thresholds are implemented for L2 and Linf attacks")
    return attack


def delta_bar(D: Dataset, attack: NormKind | str) -> float:
    """``1 / (n ||alpha_hat||_inf)``; the interpolator is optimal for ``0 < delta <= delta_bar``.

    The infinity norm of ``alpha_hat`` is used for both attack norms.
    Returns ``inf`` when ``y = 0``.
    """
    cert = solve_dual_certificate(D, _attack(attack))
    amax = float(np.abs(cert.alpha).max())
    return np.inf if amax == 0 else 1.0 / (D.n * amax)


def delta_bar_linmap(D: Dataset, S: ArrayLike, attack: NormKind | str) -> float:
    """Same threshold for predictors of the form ``x @ S.T @ theta``."""
    cert = dual_certificate_linmap(D, S, _attack(attack))
    amax = float(np.abs(cert.alpha).max())
    return np.inf if amax == 0 else 1.0 / (D.n * amax)


def delta_bar_bounds(D: Dataset, attack: NormKind | str) -> tuple[float, float]:
    """Bounds on ``n * delta_bar`` from the extreme singular values of ``X``.

    Linf attack: ``sigma_n / sqrt(p) <= n delta_bar <= sqrt(p) sigma_1``.
    L2 attack:   ``sigma_n <= n delta_bar <= sqrt(p) sigma_1``.
    """
    attack = _attack(attack)
    check_full_row_rank(D.X)
    sig = np.linalg.svd(D.X, compute_uv=False)
    s1, sn = float(sig[0]), float(sig[D.n - 1])
    rp = np.sqrt(D.p)
    lower = sn / rp if attack is NormKind.Linf else sn
    return float(lower), float(rp * s1)


def zero_threshold(D: Dataset, attack: NormKind | str) -> float:
    """``||X.T @ y||_attack / ||y||_1``: ``beta = 0`` is optimal iff ``delta`` is at least this.

    The numerator uses the attack norm (the subdifferential of the dual norm
    at the origin is the attack-norm unit ball).  ``y = 0`` gives 0.
    """
    attack = _attack(attack)
    y1 = float(np.abs(D.y).sum())
    if y1 == 0:
        return 0.0
    return norm(D.X.T @ D.y, attack) / y1


def threshold_report(D: Dataset, attack: NormKind | str) -> ThresholdReport:
    attack = _attack(attack)
    lo, hi = delta_bar_bounds(D, attack)
    return ThresholdReport(
        delta_bar=delta_bar(D, attack),
        delta_bar_lower=lo / D.n,
        delta_bar_upper=hi / D.n,
        zero_threshold=zero_threshold(D, attack),
        attack=attack,
    )


def reference_radius(X: ArrayLike, attack: NormKind | str, fraction: float = 0.01) -> float:
    """``fraction * mean ||x_i||`` with the l2 norm for L2 attacks and the l1 norm for Linf."""
    X = np.asarray(X, dtype=float)
    kind = NormKind.L2 if _attack(attack) is NormKind.L2 else NormKind.L1
    return fraction * float(np.mean([norm(row, kind) for row in X]))


def delta_star(X: ArrayLike, eps: ArrayLike) -> float:
    """``3 ||X.T @ eps||_inf / ||eps||_1``; unchanged by rescaling ``eps``."""
    X = np.asarray(X, dtype=float)
    eps = np.asarray(eps, dtype=float).ravel()
    e1 = float(np.abs(eps).sum())
    if e1 == 0:
        raise ValueError("eps must be nonzero")
    return 3.0 * float(np.abs(X.T @ eps).max(initial=0.0)) / e1


def lasso_lambda_star(X: ArrayLike, eps: ArrayLike) -> float:
    """``3 ||X.T @ eps||_inf / n``; scales linearly with the noise."""
    X = np.asarray(X, dtype=float)
    eps = np.asarray(eps, dtype=float).ravel()
    return 3.0 * float(np.abs(X.T @ eps).max(initial=0.0)) / X.shape[0]


def prediction_bound_rhs(delta: float, beta_star_l1: float, eps_l1: float, n: int) -> float:
    """``8 delta ||beta*||_1 (||eps||_1 / n + 10 delta ||beta*||_1)``."""
    if min(delta, beta_star_l1, eps_l1) < 0 or n < 1:
        raise ValueError("inputs must be nonnegative and n >= 1")
    return 8.0 * delta * beta_star_l1 * (eps_l1 / n + 10.0 * delta * beta_star_l1)


def lasso_bound_rhs(lam: float, beta_star_l1: float) -> float:
    """``8 lam ||beta*||_1``."""
    if lam < 0 or beta_star_l1 < 0:
        raise ValueError("inputs must be nonnegative")
    return 8.0 * lam * beta_star_l1


def _in_sample_error(X: np.ndarray, beta_hat: ArrayLike, beta_star: ArrayLike) -> float:
    diff = X @ (np.asarray(beta_hat, dtype=float) - np.asarray(beta_star, dtype=float))
    return float(diff @ diff) / X.shape[0]


def adv_bound_report(X: ArrayLike, eps: ArrayLike, beta_hat: ArrayLike, beta_star: ArrayLike, delta: float) -> BoundReport:
    """Compare ``(1/n)||X (beta_hat - beta*)||^2`` with the Linf adversarial-training bound."""
    X = np.asarray(X, dtype=float)
    eps = np.asarray(eps, dtype=float)
    rhs = prediction_bound_rhs(delta, float(np.abs(beta_star).sum()), float(np.abs(eps).sum()), X.shape[0])
    return BoundReport(delta_star(X, eps), rhs, _in_sample_error(X, beta_hat, beta_star))


def lasso_bound_report(X: ArrayLike, eps: ArrayLike, beta_hat: ArrayLike, beta_star: ArrayLike, lam: float) -> BoundReport:
    X = np.asarray(X, dtype=float)
    rhs = lasso_bound_rhs(lam, float(np.abs(beta_star).sum()))
    return BoundReport(lasso_lambda_star(X, eps), rhs, _in_sample_error(X, beta_hat, beta_star))


def robustness_gap_bound(
    adv_train_risk_at_delta_bar: float, delta_test: float, delta_bar: float, mismatched: bool = False, p: int = 1
) -> float:
    """``(delta_test / delta_bar) sqrt(R_adv(beta_hat; delta_bar))``, times ``sqrt(p)`` when mismatched.

    Bounds ``sqrt(adv test risk) - sqrt(test risk)`` for the minimum-norm
    interpolator.  The mismatched variant covers an l2-trained interpolator
    attacked in Linf at test time.
    """
    if not delta_bar > 0:
        raise ValueError("delta_bar must be positive")
    if adv_train_risk_at_delta_bar < 0 or delta_test < 0:
        raise ValueError("risk and delta_test must be nonnegative")
    val = (delta_test / delta_bar) * np.sqrt(adv_train_risk_at_delta_bar)
    return float(val * np.sqrt(p)) if mismatched else float(val)


def pivotal_delta(n: int, p: float, M: float, K: float = 1.0) -> float:
    """``K M sqrt(log(p) / n)``: a radius that needs no noise-scale estimate."""
    if n < 1:
        raise ValueError("n must be positive")
    if p < 2:
        raise ValueError("p must be at least 2")
    if not (M > 0 and K > 0):
        raise ValueError("M and K must be positive")
    return float(K * M * np.sqrt(np.log(p) / n))


def _xi(n: int, seed: int) -> np.ndarray:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(b"heuristic-xi")])
    return np.random.Generator(np.random.PCG64(ss)).standard_normal(n)


def heuristic_delta(X: ArrayLike, c: float = 0.5, seed: int = 0, xi_scale: float = 1.0) -> float:
    """``c ||X.T @ xi||_inf / ||xi||_1`` for a seeded standard normal ``xi``.

    ``xi_scale`` rescales the draw (a hook for checking scale invariance).
    """
    X = np.asarray(X, dtype=float)
    xi = xi_scale * _xi(X.shape[0], seed)
    return float(c * np.abs(X.T @ xi).max(initial=0.0) / np.abs(xi).sum())


def heuristic_sqrt_lasso_lambda(X: ArrayLike, c: float = 0.1, seed: int = 0) -> float:
    """``c ||X.T @ xi||_inf / ||xi||_2`` for a seeded standard normal ``xi``."""
    X = np.asarray(X, dtype=float)
    xi = _xi(X.shape[0], seed)
    return float(c * np.abs(X.T @ xi).max(initial=0.0) / np.linalg.norm(xi))


def shrinkage_equiv_check(beta_hat: ArrayLike, D: Dataset, cfg: AdvConfig) -> ShrinkageReport:
    """Check the conditions under which adversarial training is a shrinkage estimator.

    When ``y > 0``, ``X.T @ 1 = 0`` and ``||beta_hat||_* <= min_i |y_i| / ||x_i||_attack``,
    ``beta_hat`` should also minimise
    ``(1/n)||y - X b||^2 + (delta ||b||_* + (1/n) s @ y)**2`` with ``s = 1``.
    In general ``s = sign(y - X beta_hat)`` is used; the residual of that
    modified objective at ``beta_hat`` is reported either way.
    """
    beta_hat = np.asarray(beta_hat, dtype=float).ravel()
    X, y = D.X, D.y
    n = D.n
    positive = bool(np.all(y > 0))
    col_sums = X.T @ np.ones(n)
    centered = bool(np.abs(col_sums).max() <= 1e-8 * n * max(np.abs(X).max(), 1e-300))
    row_norms = np.array([norm(row, cfg.attack) for row in X])
    with np.errstate(divide="ignore"):
        limit = float(np.min(np.where(row_norms > 0, np.abs(y) / row_norms, np.inf)))
    bnorm = norm(beta_hat, cfg.regularizer)
    norm_ok = bnorm <= limit
    conditions = positive and centered and norm_ok
    if conditions:
        s = np.ones(n)
    else:
        r = y - X @ beta_hat
        s = np.where(r >= 0, 1.0, -1.0)
    offset = float(s @ y) / n
    res = modified_objective_residual(beta_hat, D, cfg, offset)
    near = bool(np.isfinite(limit) and bnorm >= 0.9 * limit)
    return ShrinkageReport(
        conditions,
        res,
        near,
        {"y_positive": positive, "centered": centered, "norm_ratio": bnorm / limit if limit > 0 else np.inf},
    )
