from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from ..norms import NormKind


class RankDeficientError(ValueError):
    """The design does not have the full row rank an interpolation routine needs."""


@dataclass(frozen=True)
class SolverOptions:
    """Stopping rules shared by the iterative solvers.

    ``smoothing_floor`` is the final barrier/duality-gap level of the
    interior-point path (the log-barrier is the smoothing being shrunk).
    """

    max_iterations: int = 200_000
    objective_tolerance: float = 1e-8
    certificate_tolerance: float = 1e-6
    smoothing_floor: float = 1e-10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        for name in ("objective_tolerance", "certificate_tolerance", "smoothing_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class FitResult:
    beta: NDArray[np.float64]
    objective_value: float
    certificate_residual: float
    iterations_used: int
    converged: bool
    method: str = ""
    info: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        b = np.array(self.beta, dtype=float, copy=True).ravel()
        b.setflags(write=False)
        object.__setattr__(self, "beta", b)


@dataclass(frozen=True)
class DualCertificate:
    """Solution of ``max alpha @ y  s.t.  ||X.T @ alpha||_attack <= 1``."""

    alpha: NDArray[np.float64]
    constraint_norm: float
    objective: float
    attack: NormKind = NormKind.Linf
    iterations_used: int = 0

    def __post_init__(self) -> None:
        a = np.array(self.alpha, dtype=float, copy=True).ravel()
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)
