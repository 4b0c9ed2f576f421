"""Certified solvers for adversarial training and its baseline estimators."""

from ._types import DualCertificate, FitResult, RankDeficientError, SolverOptions
from .adv import adv_objective, solve_adv, solve_adv_linmap
from .baselines import lasso_objective, solve_lasso, solve_ridge, solve_sqrt_lasso, sqrt_lasso_objective
from .certificate import (
    lasso_kkt_residual,
    min_norm_selection,
    modified_objective_residual,
    optimality_residual,
    ridge_gradient_norm,
    sqrt_lasso_residual,
)
from .interpolators import (
    check_full_row_rank,
    dual_certificate_linmap,
    min_l1_from_lp,
    min_norm_interpolator,
    min_norm_interpolator_linmap,
    solve_dual_certificate,
)

__all__ = [
    "DualCertificate",
    "FitResult",
    "RankDeficientError",
    "SolverOptions",
    "adv_objective",
    "solve_adv",
    "solve_adv_linmap",
    "solve_ridge",
    "solve_lasso",
    "solve_sqrt_lasso",
    "lasso_objective",
    "sqrt_lasso_objective",
    "optimality_residual",
    "min_norm_selection",
    "lasso_kkt_residual",
    "sqrt_lasso_residual",
    "ridge_gradient_norm",
    "modified_objective_residual",
    "check_full_row_rank",
    "min_norm_interpolator",
    "min_norm_interpolator_linmap",
    "min_l1_from_lp",
    "solve_dual_certificate",
    "dual_certificate_linmap",
]
