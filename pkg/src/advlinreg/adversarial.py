"""Adversarial risk of linear predictors.

The worst case over a norm ball of radius ``delta`` around each input has a
closed form in terms of the dual norm of the coefficients::

    max_{||dx_i|| <= delta} (y_i - (x_i + dx_i) @ beta)**2
        = (|y_i - x_i @ beta| + delta * ||beta||_*)**2

This module evaluates both sides: the closed form, and the primal maximum by
explicit construction of the maximiser or by sampling the ball.  It also
covers the general convex-loss version (regression and classification) and
the row/column bounded disturbance sets of robust regression.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .norms import Dataset, NormKind, as_norm_kind, dual_kind, norm, norm_subgradient

__all__ = [
    "AdvConfig",
    "GeneralLossKind",
    "adv_risk",
    "adv_risk_per_sample",
    "adv_risk_linmap",
    "worst_case_perturbations",
    "sample_ball",
    "adv_risk_sampled",
    "base_loss",
    "adv_loss_general",
    "general_worst_case_perturbation",
    "robust_rowset_worst_value",
    "robust_colset_worst_value",
    "robust_colset_worst_case",
    "adv_test_mse",
]

FloatArray = NDArray[np.float64]


@dataclass(frozen=True)
class AdvConfig:
    """Attack radius and the norm of the attack ball."""

    delta: float
    attack: NormKind = NormKind.Linf

    def __post_init__(self) -> None:
        delta = float(self.delta)
        if not np.isfinite(delta) or delta < 0:
            raise ValueError(f"delta must be a finite nonnegative number, got {self.delta!r}")
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "attack", as_norm_kind(self.attack))

    @property
    def regularizer(self) -> NormKind:
        return dual_kind(self.attack)

    def with_delta(self, delta: float) -> "AdvConfig":
        return AdvConfig(delta, self.attack)


class GeneralLossKind(enum.Enum):
    SquaredRegression = "squared"
    AbsoluteRegression = "absolute"
    Hinge = "hinge"
    Logistic = "logistic"

    @property
    def is_classification(self) -> bool:
        return self in (GeneralLossKind.Hinge, GeneralLossKind.Logistic)


def _check_beta(beta: ArrayLike, p: int) -> FloatArray:
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.shape[0] != p:
        raise ValueError(f"beta has length {beta.shape[0]}, expected {p}")
    return beta


def adv_risk_per_sample(beta: ArrayLike, D: Dataset, cfg: AdvConfig) -> FloatArray:
    """Per-row worst-case squared error ``(|r_i| + delta ||beta||_*)**2``."""
    beta = _check_beta(beta, D.p)
    r = D.y - D.X @ beta
    return (np.abs(r) + cfg.delta * norm(beta, cfg.regularizer)) ** 2


def adv_risk(beta: ArrayLike, D: Dataset, cfg: AdvConfig) -> float:
    """Adversarial mean squared error via the dual-norm closed form."""
    return float(np.mean(adv_risk_per_sample(beta, D, cfg)))


def adv_risk_linmap(theta: ArrayLike, D: Dataset, S: ArrayLike, cfg: AdvConfig) -> float:
    """Adversarial risk when inputs pass through a fixed linear map ``S`` (p x d).

    Predictions are ``x @ S.T @ theta``; the attack acts on the raw input
    ``x``, so the regulariser is ``||S.T @ theta||_*``.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[1] != D.p:
        raise ValueError(f"S must have shape (p, {D.p}), got {S.shape}")
    theta = _check_beta(theta, S.shape[0])
    w = S.T @ theta
    r = D.y - D.X @ w
    return float(np.mean((np.abs(r) + cfg.delta * norm(w, cfg.regularizer)) ** 2))


def _signs_no_zero(r: FloatArray) -> FloatArray:
    # a zero residual can be pushed either way; pick +1
    return np.where(r >= 0, 1.0, -1.0)


def worst_case_perturbations(beta: ArrayLike, D: Dataset, cfg: AdvConfig) -> FloatArray:
    """Rows ``dx_i`` attaining the inner maximum for every sample.

    ``dx_i = -sign(y_i - x_i @ beta) * delta * g`` where ``g`` is a unit
    vector of the attack norm aligned with ``beta`` (``g @ beta = ||beta||_*``).
    Returns an ``(n, p)`` matrix; zero when ``delta == 0`` or ``beta == 0``.
    """
    beta = _check_beta(beta, D.p)
    out = np.zeros((D.n, D.p))
    if cfg.delta == 0 or not np.any(beta):
        return out
    g = norm_subgradient(beta, cfg.regularizer)
    s = -_signs_no_zero(D.y - D.X @ beta)
    return cfg.delta * np.outer(s, g)


def sample_ball(
    rng: np.random.Generator, size: int, dim: int, radius: float, kind: NormKind | str
) -> FloatArray:
    """Draw ``size`` points uniformly from the ``kind``-ball of given radius in R^dim."""
    kind = as_norm_kind(kind)
    if kind is NormKind.Linf:
        return rng.uniform(-radius, radius, size=(size, dim))
    if kind is NormKind.L2:
        z = rng.standard_normal((size, dim))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        rad = radius * rng.uniform(size=(size, 1)) ** (1.0 / dim)
        return z * rad
    # uniform on the l1 ball: normalised exponential spacings with random signs
    e = rng.exponential(size=(size, dim + 1))
    pts = e[:, :dim] / e.sum(axis=1, keepdims=True)
    signs = rng.choice([-1.0, 1.0], size=(size, dim))
    return radius * pts * signs


def adv_risk_sampled(
    beta: ArrayLike,
    D: Dataset,
    cfg: AdvConfig,
    samples: int,
    seed: int | None = 0,
    include_worst_case: bool = True,
) -> float:
    """Brute-force lower estimate of the adversarial risk.

    For each row, the primal squared error is maximised over ``samples``
    uniform draws from the attack ball (plus the constructed maximiser when
    ``include_worst_case``).  Never exceeds :func:`adv_risk` beyond rounding.
    """
    if int(samples) < 1:
        raise ValueError("samples must be a positive integer")
    beta = _check_beta(beta, D.p)
    rng = np.random.default_rng(seed)
    best = np.zeros(D.n)
    for i in range(D.n):
        dx = sample_ball(rng, int(samples), D.p, cfg.delta, cfg.attack)
        vals = (D.y[i] - (D.X[i] + dx) @ beta) ** 2
        best[i] = vals.max()
    if include_worst_case:
        W = worst_case_perturbations(beta, D, cfg)
        wc = (D.y - np.einsum("ij,j->i", D.X + W, beta)) ** 2
        best = np.maximum(best, wc)
    return float(best.mean())


def base_loss(z: ArrayLike, kind: GeneralLossKind, y: ArrayLike | None = None) -> NDArray:
    """Loss without an adversary.

    Regression kinds take the prediction ``z`` and target ``y``; classification
    kinds take the prediction ``z`` and label ``y`` in {-1, +1} and act on the
    margin ``y * z``.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(0.0 if y is None else y, dtype=float)
    if kind is GeneralLossKind.SquaredRegression:
        return (y - z) ** 2
    if kind is GeneralLossKind.AbsoluteRegression:
        return np.abs(y - z)
    m = y * z
    if kind is GeneralLossKind.Hinge:
        return np.maximum(0.0, 1.0 - m)
    return np.logaddexp(0.0, -m)


def _check_label(y: float, kind: GeneralLossKind) -> None:
    if kind.is_classification and y not in (-1.0, 1.0):
        raise ValueError(f"classification losses need y in {{-1, +1}}, got {y!r}")


def adv_loss_general(inner: float, y: float, margin: float, kind: GeneralLossKind) -> float:
    """Worst-case loss given ``inner = x @ beta`` and ``margin = delta * ||beta||_*``.

    Regression: ``l(|y - inner| + margin)``.  Classification: ``l(y * inner - margin)``.
    """
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    y = float(y)
    _check_label(y, kind)
    if kind is GeneralLossKind.SquaredRegression:
        return float((abs(y - inner) + margin) ** 2)
    if kind is GeneralLossKind.AbsoluteRegression:
        return float(abs(y - inner) + margin)
    z = y * inner - margin
    if kind is GeneralLossKind.Hinge:
        return float(max(0.0, 1.0 - z))
    return float(np.logaddexp(0.0, -z))


def general_worst_case_perturbation(
    x: ArrayLike, beta: ArrayLike, y: float, cfg: AdvConfig, kind: GeneralLossKind
) -> FloatArray:
    """Constructed maximiser ``dx`` for one sample under a general loss.

    The prediction is pushed by ``s * delta * ||beta||_*`` with
    ``s = -sign(y - x @ beta)`` for regression and ``s = -y`` for classification.
    """
    x = np.asarray(x, dtype=float).ravel()
    beta = _check_beta(beta, x.shape[0])
    _check_label(float(y), kind)
    if cfg.delta == 0 or not np.any(beta):
        return np.zeros_like(x)
    g = norm_subgradient(beta, cfg.regularizer)
    if kind.is_classification:
        s = -float(y)
    else:
        s = -1.0 if y - x @ beta >= 0 else 1.0
    return s * cfg.delta * g


def robust_rowset_worst_value(beta: ArrayLike, D: Dataset, cfg: AdvConfig) -> float:
    """``max ||y - (X + Delta) beta||_2`` over disturbances with rows in the attack ball.

    Evaluated in the primal at the constructed worst-case rows.
    """
    W = worst_case_perturbations(beta, D, cfg)
    return float(np.linalg.norm(D.y - (D.X + W) @ np.asarray(beta, dtype=float)))


def robust_colset_worst_case(beta: ArrayLike, D: Dataset, delta: float) -> FloatArray:
    """Disturbance with l2-bounded columns maximising ``||y - (X + Delta) beta||_2``.

    Column ``j`` is ``-delta * sign(beta_j) * u`` with ``u`` the unit residual
    direction (any unit vector when the residual vanishes).
    """
    beta = _check_beta(beta, D.p)
    r = D.y - D.X @ beta
    nr = np.linalg.norm(r)
    if nr > 0:
        u = r / nr
    else:
        u = np.zeros(D.n)
        u[0] = 1.0
    return -float(delta) * np.outer(u, np.sign(beta))


def robust_colset_worst_value(beta: ArrayLike, D: Dataset, delta: float) -> float:
    """Closed form ``||y - X beta||_2 + delta * ||beta||_1`` of the column-set robust objective."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    beta = _check_beta(beta, D.p)
    return float(np.linalg.norm(D.y - D.X @ beta) + delta * np.abs(beta).sum())


def adv_test_mse(beta: ArrayLike, Dtest: Dataset, cfg: AdvConfig) -> float:
    """Adversarial squared error on a held-out set (closed form)."""
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.shape[0] != Dtest.p:
        raise ValueError(f"beta has {beta.shape[0]} coefficients but test data has {Dtest.p} features")
    return adv_risk(beta, Dtest, cfg)
