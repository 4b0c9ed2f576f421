"""Adversarially trained linear regression: closed-form risk, certified solvers and thresholds."""

from .adversarial import AdvConfig, adv_risk, adv_risk_linmap, worst_case_perturbations
from .norms import Dataset, NormKind, norm
from .solvers import (
    FitResult,
    SolverOptions,
    min_norm_interpolator,
    optimality_residual,
    solve_adv,
    solve_lasso,
    solve_ridge,
    solve_sqrt_lasso,
)
from .theory import delta_bar, delta_bar_bounds, zero_threshold

__all__ = [
    "AdvConfig",
    "Dataset",
    "FitResult",
    "NormKind",
    "SolverOptions",
    "adv_risk",
    "adv_risk_linmap",
    "delta_bar",
    "delta_bar_bounds",
    "min_norm_interpolator",
    "norm",
    "optimality_residual",
    "solve_adv",
    "solve_lasso",
    "solve_ridge",
    "solve_sqrt_lasso",
    "worst_case_perturbations",
    "zero_threshold",
]
