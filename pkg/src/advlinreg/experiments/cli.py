"""``advlinreg`` command-line entry point.

Exit codes: 0 success, 1 verify failure, 2 usage error, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from ..datagen import CsvFormatError, ScenarioKind, ScenarioSpec, load_csv, load_diabetes, normalize, split
from ..norms import NormKind
from .runners import (
    METHODS,
    TUNING_RULES,
    Problem,
    make_problem,
    parse_method,
    resolve_grid,
    run_compare,
    run_path,
    run_sweep,
    run_sweep_repeated,
    run_threshold_curve,
)
from .svg import emit_svg
from .tables import SweepTable, write_json
from .verify import run_verify

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NONCONVERGED = 0, 1, 2, 3

log = logging.getLogger("advlinreg")


class UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", choices=[k.value for k in ScenarioKind], default="gaussian")
    p.add_argument("--csv", dest="csv_path", help="CSV file (with --scenario csv; default: bundled diabetes table)")
    p.add_argument("--target", help="target column of the CSV file")
    p.add_argument("--n", type=int, default=60, help="training samples")
    p.add_argument("--p", type=int, default=200, help="features")
    p.add_argument("--d", type=int, default=None, help="latent / raw input dimension")
    p.add_argument("--sigma", type=float, default=1.0, help="noise standard deviation")
    p.add_argument("--sparsity", type=int, default=None, help="nonzeros of the true parameter (gaussian)")
    p.add_argument("--n-test", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--attack", choices=["l2", "linf"], default="linf")
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")


def _grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", default="adv", help=f"one of {', '.join(METHODS)} (or adv-l2 / adv-linf)")
    p.add_argument("--grid-min", type=float, default=None)
    p.add_argument("--grid-max", type=float, default=None)
    p.add_argument("--grid-points", type=int, default=None)
    p.add_argument("--svg", help="also write an SVG line plot")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="advlinreg", description="Adversarially trained linear regression experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("path", help="coefficient paths")
    _common(p)
    _grid_flags(p)

    p = sub.add_parser("sweep", help="train/test error against the knob")
    _common(p)
    _grid_flags(p)
    p.add_argument("--repetitions", type=int, default=1)

    p = sub.add_parser("threshold-curve", help="delta_bar against the number of features")
    _common(p)
    p.add_argument("--p-values", default="80,120,200,400", help="comma-separated feature counts")
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--svg")

    p = sub.add_parser("compare", help="tuned methods and untuned interpolators")
    _common(p)
    p.add_argument("--methods", default="adv-linf,lasso,sqrt-lasso,adv-l2,ridge")
    p.add_argument("--tuning", default="grid", help=f"rule for all methods ({', '.join(TUNING_RULES)}) or method=rule,...")
    p.add_argument("--grid-points", type=int, default=20)

    p = sub.add_parser("verify", help="run the property ledger")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--delta-bar-scale", type=float, default=1.0, help=argparse.SUPPRESS)
    p.add_argument("-v", "--verbose", action="store_true")
    return ap


def _spec(args) -> ScenarioSpec:
    kind = ScenarioKind(args.scenario)
    return ScenarioSpec(
        kind=kind,
        n=args.n,
        p=args.p,
        sigma=args.sigma,
        d=args.d,
        sparsity=args.sparsity,
        n_test=args.n_test,
        path=args.csv_path,
        target=args.target,
        seed=args.seed,
    )


def _problem(args) -> Problem:
    spec = _spec(args)
    if spec.kind is ScenarioKind.CsvFile:
        if args.csv_path is None:
            # the bundled diabetes table stands in when no file is given
            D = normalize(load_diabetes())
        elif not args.target:
            raise UsageError("--csv needs --target")
        else:
            D = normalize(load_csv(args.csv_path, args.target))
        if args.n and args.n < D.n:
            frac = args.n / D.n
        else:
            frac = 0.5
        return Problem(split(D, frac, seed=args.seed), spec)
    return make_problem(spec)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _write_table(table: SweepTable, args, ys: list[str], x: str, log_x: bool, marker: float | None) -> None:
    _emit(table.to_csv(None), args.out)
    if getattr(args, "svg", None):
        Path(args.svg).write_text(emit_svg(table, x, ys, log_x=log_x, marker=marker, title=table.metadata.get("method")))


def _check_converged(table: SweepTable) -> int:
    bad = [r["knob"] for r in table.rows if "converged" in r and not r["converged"]]
    if bad:
        log.error("solver did not certify at %d grid point(s), first knob %.6g", len(bad), bad[0])
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_path(args) -> int:
    method, attack = parse_method(args.method, args.attack)
    pr = _problem(args)
    grid = resolve_grid(method, pr, attack, args.grid_min, args.grid_max, args.grid_points)
    t = run_path(pr, method, attack, grid, args.workers)
    coefs = [c for c in t.columns if c.startswith("coef_") and c[5:].isdigit()]
    _write_table(t, args, coefs, "coef_l1", False, None)
    return _check_converged(t)


def cmd_sweep(args) -> int:
    method, attack = parse_method(args.method, args.attack)
    if args.repetitions < 1:
        raise UsageError("--repetitions must be positive")
    pr = _problem(args)
    grid = resolve_grid(method, pr, attack, args.grid_min, args.grid_max, args.grid_points)
    if args.repetitions > 1 and pr.spec.kind is not ScenarioKind.CsvFile:
        t = run_sweep_repeated(pr.spec, method, attack, args.repetitions, grid, args.workers)
    else:
        t = run_sweep(pr, method, attack, grid, args.workers)
    marker = t.metadata["delta_bar"] if method == "adv" else None
    if marker is not None and not np.isfinite(marker):
        marker = None
    _write_table(t, args, ["train_mse", "test_mse", "adv_test_mse"], "knob", True, marker)
    return _check_converged(t)


def cmd_threshold_curve(args) -> int:
    try:
        ps = [int(v) for v in args.p_values.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --p-values: {exc}") from exc
    if not ps:
        raise UsageError("--p-values is empty")
    if args.scenario == "csv":
        raise UsageError("threshold-curve needs a synthetic scenario")
    t = run_threshold_curve(_spec(args), ps, NormKind(args.attack), args.repetitions)
    _write_table(t, args, ["delta_bar", "lower", "upper", "reference"], "p", False, None)
    return EXIT_OK


def _parse_tuning(text: str, methods: list[str]) -> dict[str, str] | str:
    if "=" not in text:
        if text not in TUNING_RULES:
            raise UsageError(f"unknown tuning rule {text!r}")
        return text
    out = {m: "grid" for m in methods}
    for part in text.split(","):
        m, _, rule = part.partition("=")
        if rule not in TUNING_RULES:
            raise UsageError(f"unknown tuning rule {rule!r}")
        out[m.strip()] = rule
    return out


def cmd_compare(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        parse_method(m)
    pr = _problem(args)
    if pr.S is not None:
        raise UsageError("compare does not support the projection scenario")
    report = run_compare(pr, methods, _parse_tuning(args.tuning, methods), args.grid_points, seed=args.seed)
    report["seed"] = args.seed
    _emit(write_json(report, None), args.out)
    if not all(m["converged"] for m in report["methods"] if m["nmse"] is not None):
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_verify(args) -> int:
    rep = run_verify(args.trials, args.seed, args.delta_bar_scale)
    _emit(write_json(rep.as_dict(), None), args.out)
    for p in rep.properties:
        log.info("%s %s margin=%.3g", "PASS" if p.passed else "FAIL", p.name, p.margin)
    return EXIT_OK if rep.passed else EXIT_VERIFY


COMMANDS = {
    "path": cmd_path,
    "sweep": cmd_sweep,
    "threshold-curve": cmd_threshold_curve,
    "compare": cmd_compare,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits with 2 on usage errors already
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValueError, CsvFormatError, FileNotFoundError) as exc:
        # RankDeficientError is a ValueError: a bad scenario choice, not a solver failure
        print(f"advlinreg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
