"""Vector norms, their duals, and subgradient selection.

Every estimator in the package is parametrised by the norm of the attack
ball.  The regulariser induced by adversarial training is the *dual* of that
norm, so the two are always handled together through :class:`NormKind`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "NormKind",
    "Dataset",
    "norm",
    "dual_kind",
    "norm_subgradient",
    "as_norm_kind",
]

FloatArray = NDArray[np.float64]


class NormKind(enum.Enum):
    L1 = "l1"
    L2 = "l2"
    Linf = "linf"

    @property
    def dual(self) -> "NormKind":
        return dual_kind(self)

    def __str__(self) -> str:
        return self.value


_DUALS = {NormKind.L1: NormKind.Linf, NormKind.L2: NormKind.L2, NormKind.Linf: NormKind.L1}


def as_norm_kind(k: NormKind | str) -> NormKind:
    """Accept either a :class:`NormKind` or its string tag (``"l2"``, ``"linf"``...)."""
    if isinstance(k, NormKind):
        return k
    key = str(k).strip().lower().replace("ℓ", "l")
    aliases = {"inf": "linf", "l_inf": "linf", "max": "linf", "1": "l1", "2": "l2"}
    key = aliases.get(key, key)
    try:
        return NormKind(key)
    except ValueError:
        raise ValueError(f"unknown norm {k!r}; expected one of l1, l2, linf") from None


def dual_kind(k: NormKind | str) -> NormKind:
    return _DUALS[as_norm_kind(k)]


def _l2(v: FloatArray) -> float:
    # rescale first so tiny or huge entries neither underflow nor overflow when squared
    m = float(np.max(np.abs(v)))
    if m == 0 or not np.isfinite(m):
        return m
    return m * float(np.sqrt(np.sum((v / m) ** 2)))


def norm(v: ArrayLike, k: NormKind | str) -> float:
    """Evaluate ``||v||_k`` (true Euclidean norm for L2)."""
    v = np.asarray(v, dtype=float).ravel()
    k = as_norm_kind(k)
    if v.size == 0:
        return 0.0
    if k is NormKind.L1:
        return float(np.sum(np.abs(v)))
    if k is NormKind.L2:
        return _l2(v)
    return float(np.max(np.abs(v)))


def norm_subgradient(v: ArrayLike, k: NormKind | str) -> FloatArray:
    """Return the minimum-Euclidean-norm element of the subdifferential of ``||.||_k`` at ``v``.

    The result ``g`` satisfies ``||g||_{dual(k)} <= 1`` and ``g @ v == ||v||_k``.
    At kinks (zero coordinates for L1, the origin for L2/Linf) the free part
    is set to zero; for Linf ties, the weight is spread evenly across the
    maximising coordinates.
    """
    v = np.asarray(v, dtype=float).ravel()
    k = as_norm_kind(k)
    g = np.zeros_like(v)
    if v.size == 0:
        return g
    if k is NormKind.L1:
        return np.sign(v)
    if k is NormKind.L2:
        m = float(np.max(np.abs(v)))
        if m > 0:
            w = v / m
            g = w / float(np.sqrt(w @ w))
        return g
    a = np.abs(v)
    m = a.max()
    if m == 0:
        return g
    top = a == m
    g[top] = np.sign(v[top]) / np.count_nonzero(top)
    return g


@dataclass(frozen=True)
class Dataset:
    """Design matrix ``X`` (n samples x p features) with response ``y``."""

    X: FloatArray
    y: FloatArray

    def __post_init__(self) -> None:
        X = np.array(self.X, dtype=float, copy=True)
        y = np.array(self.y, dtype=float, copy=True).ravel()
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise ValueError(f"X must be 2-dimensional, got shape {X.shape}")
        n, p = X.shape
        if n < 1 or p < 1:
            raise ValueError(f"dataset needs n >= 1 and p >= 1, got shape {X.shape}")
        if y.shape[0] != n:
            raise ValueError(f"y has length {y.shape[0]} but X has {n} rows")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset entries must be finite")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def residual(self, beta: ArrayLike) -> FloatArray:
        return self.y - self.X @ np.asarray(beta, dtype=float)

    def mse(self, beta: ArrayLike) -> float:
        r = self.residual(beta)
        return float(r @ r) / self.n
