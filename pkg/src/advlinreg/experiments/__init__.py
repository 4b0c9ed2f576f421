"""Experiment drivers, tables, plots and the command-line interface."""

from .runners import (
    Problem,
    default_grid,
    fit,
    make_problem,
    parse_method,
    run_compare,
    run_path,
    run_sweep,
    run_sweep_repeated,
    run_threshold_curve,
    sparsity_agreement,
    transition_within_one_step,
)
from .svg import emit_svg
from .tables import SweepTable
from .verify import VerifyReport, run_verify

__all__ = [
    "Problem",
    "SweepTable",
    "VerifyReport",
    "default_grid",
    "emit_svg",
    "fit",
    "make_problem",
    "parse_method",
    "run_compare",
    "run_path",
    "run_sweep",
    "run_sweep_repeated",
    "run_threshold_curve",
    "run_verify",
    "sparsity_agreement",
    "transition_within_one_step",
]
