"""Experiment drivers: regularisation paths, radius sweeps, threshold curves, method comparison."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from importlib.metadata import PackageNotFoundError, version

import numpy as np

from ..adversarial import AdvConfig, adv_risk, adv_risk_linmap
from ..datagen import LabeledSplit, ProjectionSplit, ScenarioKind, ScenarioSpec, gen_fourier, gen_gaussian, gen_latent, gen_projection, rng_for
from ..norms import Dataset, NormKind, as_norm_kind
from ..solvers import (
    FitResult,
    RankDeficientError,
    SolverOptions,
    min_norm_interpolator,
    min_norm_interpolator_linmap,
    solve_adv,
    solve_adv_linmap,
    solve_lasso,
    solve_ridge,
    solve_sqrt_lasso,
)
from ..theory import (
    delta_bar,
    delta_bar_bounds,
    delta_bar_linmap,
    heuristic_delta,
    heuristic_sqrt_lasso_lambda,
    pivotal_delta,
    reference_radius,
    zero_threshold,
)
from .tables import SweepTable, median_rows

METHODS = ("adv", "lasso", "ridge", "sqrt-lasso", "min-norm")
TUNING_RULES = ("grid", "cv", "heuristic", "pivotal")
DEFAULT_GRID_POINTS = 48


def tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:  # running from a source tree
        return "0+unknown"


def parse_method(name: str, attack: NormKind | str = NormKind.Linf) -> tuple[str, NormKind]:
    """Accept ``adv``, ``adv-linf``, ``adv-l2``, ``lasso`` ... and return ``(method, attack)``."""
    key = name.strip().lower()
    attack = as_norm_kind(attack)
    if key.startswith("adv-"):
        return "adv", as_norm_kind(key[4:])
    if key in ("min-l1", "min-norm-l1"):
        return "min-norm", NormKind.Linf
    if key in ("min-l2", "min-norm-l2"):
        return "min-norm", NormKind.L2
    if key not in METHODS:
        raise ValueError(f"unknown method {name!r}; expected one of {', '.join(METHODS)} (or adv-l2/adv-linf)")
    return key, attack


def method_label(method: str, attack: NormKind) -> str:
    if method == "adv":
        return f"adv-{attack.value}"
    if method == "min-norm":
        return "min-l1" if attack is NormKind.Linf else "min-l2"
    return method


@dataclass(frozen=True)
class Problem:
    """Training/test data for one realisation; ``S`` is set for projection scenarios.

    With ``S`` the datasets hold projected features ``X @ S.T`` and ``raw``
    keeps the ambient inputs on which the attack acts.
    """

    split: LabeledSplit
    spec: ScenarioSpec | None = None
    S: np.ndarray | None = None
    raw: LabeledSplit | None = None

    @property
    def train(self) -> Dataset:
        return self.split.train

    @property
    def test(self) -> Dataset:
        return self.split.test


def make_problem(spec: ScenarioSpec) -> Problem:
    kind = spec.kind
    if kind is ScenarioKind.Gaussian:
        return Problem(gen_gaussian(spec), spec)
    if kind is ScenarioKind.Latent:
        return Problem(gen_latent(spec), spec)
    if kind is ScenarioKind.FourierFeatures:
        return Problem(gen_fourier(spec), spec)
    if kind is ScenarioKind.RandomProjection:
        ps: ProjectionSplit = gen_projection(spec)
        return Problem(ps.projected(), spec, ps.S, ps.raw)
    raise ValueError("csv scenarios are built with problem_from_dataset")


def problem_from_split(split: LabeledSplit, spec: ScenarioSpec | None = None) -> Problem:
    return Problem(split, spec)


def fit(method: str, D: Dataset, knob: float, attack: NormKind, problem: Problem | None = None, opts: SolverOptions | None = None) -> FitResult:
    """Fit one method at one knob value (``delta`` for adv, ``lambda`` otherwise)."""
    S = problem.S if problem is not None else None
    if method == "adv":
        cfg = AdvConfig(knob, attack)
        if S is not None:
            raw = _raw_for(D, problem)
            return solve_adv_linmap(raw, S, cfg, opts)
        return solve_adv(D, cfg, opts)
    if method == "lasso":
        return solve_lasso(D, knob, opts)
    if method == "ridge":
        return solve_ridge(D, knob)
    if method == "sqrt-lasso":
        return solve_sqrt_lasso(D, knob, opts)
    if method == "min-norm":
        if S is not None:
            return min_norm_interpolator_linmap(_raw_for(D, problem), S, attack)
        return min_norm_interpolator(D, attack, opts)
    raise ValueError(f"unknown method {method!r}")


def _raw_for(D: Dataset, problem: Problem) -> Dataset:
    # the projected training set is paired with its raw counterpart
    if problem.raw is None:
        raise ValueError("projection problem without raw data")
    if D is problem.split.train or D.n == problem.raw.train.n and np.array_equal(D.y, problem.raw.train.y):
        return problem.raw.train
    raise ValueError("linear-map fits need the raw training inputs")


def thresholds(problem: Problem, attack: NormKind) -> dict:
    """``delta_bar`` (nan when not overparametrised) and zero threshold on the training split."""
    D = problem.train
    out = {"delta_bar": float("nan"), "zero_threshold": float("nan")}
    try:
        if problem.S is not None:
            out["delta_bar"] = delta_bar_linmap(problem.raw.train, problem.S, attack)
        else:
            out["delta_bar"] = delta_bar(D, attack)
    except RankDeficientError:
        pass
    rawD = problem.raw.train if problem.S is not None else D
    out["zero_threshold"] = zero_threshold(rawD, attack)
    return out


def default_grid(method: str, problem: Problem, attack: NormKind, points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Geometric grid; for adversarial training it spans ``[0.05 delta_bar, 2 zero_threshold]``."""
    D = problem.train
    n = D.n
    if method == "adv":
        th = thresholds(problem, attack)
        hi = 2.0 * th["zero_threshold"]
        lo = 0.05 * th["delta_bar"] if np.isfinite(th["delta_bar"]) else 1e-4 * hi
        return np.geomspace(lo, hi, points)
    if method == "lasso":
        lmax = 2.0 * float(np.abs(D.X.T @ D.y).max()) / n
        return np.geomspace(1e-4 * lmax, 2.0 * lmax, points)
    if method == "sqrt-lasso":
        l0 = float(np.abs(D.X.T @ D.y).max()) / (np.sqrt(n) * float(np.linalg.norm(D.y)))
        return np.geomspace(1e-4 * l0, 2.0 * l0, points)
    if method == "ridge":
        return np.geomspace(1e-8, 1e2, points)
    return np.array([0.0])


def resolve_grid(method: str, problem: Problem, attack: NormKind, grid_min: float | None, grid_max: float | None, points: int | None) -> np.ndarray:
    points = DEFAULT_GRID_POINTS if points is None else int(points)
    if points < 1:
        raise ValueError("grid needs at least one point")
    if method == "min-norm":
        return np.array([0.0])
    if grid_min is None and grid_max is None:
        return default_grid(method, problem, attack, points)
    base = default_grid(method, problem, attack, max(points, 2))
    lo = base[0] if grid_min is None else float(grid_min)
    hi = base[-1] if grid_max is None else float(grid_max)
    if not (lo > 0 and hi > 0):
        raise ValueError("grid bounds must be positive")
    if points == 1:
        return np.array([lo])
    if hi <= lo:
        raise ValueError("grid-max must exceed grid-min")
    return np.geomspace(lo, hi, points)


def _evaluate(args: tuple) -> dict:
    method, knob, attack, problem, delta_test = args
    D = problem.train
    res = fit(method, D, float(knob), attack, problem)
    b = np.asarray(res.beta)
    row = {
        "knob": float(knob),
        "inv_knob": (1.0 / knob) if knob > 0 else float("inf"),
        "train_mse": D.mse(b),
        "test_mse": problem.test.mse(b),
    }
    cfg_test = AdvConfig(delta_test, attack)
    if problem.S is not None:
        row["adv_test_mse"] = adv_risk_linmap(b, problem.raw.test, problem.S, cfg_test)
        w = problem.S.T @ b
    else:
        row["adv_test_mse"] = adv_risk(b, problem.test, cfg_test)
        w = b
    row.update(
        {
            "certificate_residual": res.certificate_residual,
            "converged": bool(res.converged),
            "coef_l1": float(np.abs(w).sum()),
            "coef_l2": float(np.linalg.norm(w)),
            "nnz": int(np.count_nonzero(np.abs(b) > 1e-10 * max(1e-300, np.abs(b).max(initial=0.0)))),
        }
    )
    for j, v in enumerate(b):
        row[f"coef_{j}"] = float(v)
    return row


def _map(fn, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        # map keeps grid order regardless of completion order
        return list(ex.map(fn, items))


def run_sweep(
    problem: Problem,
    method: str,
    attack: NormKind | str,
    grid: np.ndarray | None = None,
    workers: int = 1,
    delta_test: float | None = None,
) -> SweepTable:
    """One independent solve per grid point on a single realisation."""
    attack = as_norm_kind(attack)
    if grid is None:
        grid = default_grid(method, problem, attack)
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty grid")
    if grid.size > 1 and not (np.all(np.diff(grid) > 0) or np.all(np.diff(grid) < 0)):
        raise ValueError("grid must be strictly monotone")
    rawX = problem.raw.train.X if problem.S is not None else problem.train.X
    if delta_test is None:
        delta_test = reference_radius(rawX, attack)
    rows = _map(_evaluate, [(method, k, attack, problem, delta_test) for k in grid], workers)
    th = thresholds(problem, attack)
    meta = {
        "method": method_label(method, attack),
        "attack": attack.value,
        "knob": "delta" if method == "adv" else "lambda",
        "delta_bar": th["delta_bar"],
        "zero_threshold": th["zero_threshold"],
        "delta_test": delta_test,
        "scenario": problem.spec.as_dict() if problem.spec is not None else None,
        "seed": problem.spec.seed if problem.spec is not None else None,
        "n_train": problem.train.n,
        "p": problem.train.p,
        "version": tool_version(),
    }
    return SweepTable(rows, meta)


def run_sweep_repeated(
    spec: ScenarioSpec,
    method: str,
    attack: NormKind | str,
    repetitions: int,
    grid: np.ndarray | None = None,
    workers: int = 1,
) -> SweepTable:
    """Median (and quartiles) of the error curves over ``repetitions`` seeds on a common grid.

    The grid is anchored on the first realisation; coefficient columns come
    from that realisation too.
    """
    attack = as_norm_kind(attack)
    problems = [make_problem(replace(spec, seed=spec.seed + k)) for k in range(repetitions)]
    if grid is None:
        grid = default_grid(method, problems[0], attack)
    tables = [run_sweep(pr, method, attack, grid, workers) for pr in problems]
    if repetitions == 1:
        return tables[0]
    rows = median_rows(tables, "knob", ["train_mse", "test_mse", "adv_test_mse"])
    first = tables[0].rows
    for i, (r, f) in enumerate(zip(rows, first)):
        r["inv_knob"] = f["inv_knob"]
        r["certificate_residual"] = max(t.rows[i]["certificate_residual"] for t in tables)
        r["converged"] = all(t.rows[i]["converged"] for t in tables)
        for k, v in f.items():
            if k.startswith("coef") or k == "nnz":
                r[k] = v
    meta = dict(tables[0].metadata)
    meta["repetitions"] = repetitions
    meta["aggregation"] = "median"
    meta["delta_bars"] = [t.metadata["delta_bar"] for t in tables]
    meta["zero_thresholds"] = [t.metadata["zero_threshold"] for t in tables]
    return SweepTable(rows, meta)


def transition_index(table: SweepTable, tol: float = 1e-6) -> int | None:
    """Index of the largest knob whose training MSE is still at most ``tol``."""
    k = table.column("knob")
    mse = table.column("train_mse")
    ok = np.flatnonzero(mse <= tol)
    if ok.size == 0:
        return None
    return int(ok[np.argmax(k[ok])])


def transition_within_one_step(table: SweepTable, tol: float = 1e-6) -> bool:
    """True when the interpolation/non-interpolation switch of the grid brackets ``delta_bar``."""
    db = float(table.metadata["delta_bar"])
    k = np.sort(table.column("knob"))
    idx = transition_index(table, tol)
    if idx is None:
        return bool(k[0] > db)
    last = table.column("knob")[idx]
    pos = int(np.searchsorted(k, last))
    nxt = k[pos + 1] if pos + 1 < k.size else np.inf
    prv = k[pos - 1] if pos > 0 else 0.0
    # the last interpolating grid point should be the last point at or below delta_bar
    return bool(prv <= db < nxt)


def run_path(problem: Problem, method: str, attack: NormKind | str, grid: np.ndarray | None = None, workers: int = 1) -> SweepTable:
    """Coefficient paths; same columns as a sweep (``coef_l1`` gives the usual x-axis)."""
    t = run_sweep(problem, method, attack, grid, workers)
    t.metadata["kind"] = "path"
    return t


def sparsity_agreement(a: SweepTable, b: SweepTable, tol: float = 1e-8) -> float:
    """Fraction of rows of ``a`` whose support matches ``b`` at the nearest ``coef_l1`` value.

    Only rows whose ``coef_l1`` lies inside the range covered by ``b`` count.
    """
    Ca, Cb = a.coefficients(), b.coefficients()
    la, lb = a.column("coef_l1"), b.column("coef_l1")
    rows = np.flatnonzero((la >= lb.min()) & (la <= lb.max()))
    hits = 0
    for i in rows:
        j = int(np.argmin(np.abs(lb - la[i])))
        sa = np.abs(Ca[i]) > tol * max(1.0, np.abs(Ca[i]).max())
        sb = np.abs(Cb[j]) > tol * max(1.0, np.abs(Cb[j]).max())
        hits += bool(np.array_equal(sa, sb))
    return hits / max(rows.size, 1)


def run_threshold_curve(spec: ScenarioSpec, p_values: list[int], attack: NormKind | str, repetitions: int = 5) -> SweepTable:
    """``delta_bar`` against the number of features at fixed ``n`` (median over seeds)."""
    attack = as_norm_kind(attack)
    if repetitions < 1:
        raise ValueError("repetitions must be positive")
    rows = []
    for p in p_values:
        if p < spec.n:
            raise ValueError(f"p={p} < n={spec.n}: the design cannot have full row rank")
        dbs, los, his, refs, zts, ok = [], [], [], [], [], []
        for k in range(repetitions):
            sp_k = replace(spec, p=int(p), seed=spec.seed + k, n_test=1)
            pr = make_problem(sp_k)
            th = thresholds(pr, attack)
            dbs.append(th["delta_bar"])
            zts.append(th["zero_threshold"])
            rawX = pr.raw.train.X if pr.S is not None else pr.train.X
            refs.append(reference_radius(rawX, attack))
            if pr.S is None:
                lo, hi = delta_bar_bounds(pr.train, attack)
                n = pr.train.n
                los.append(lo / n)
                his.append(hi / n)
                ok.append(lo / n <= th["delta_bar"] <= hi / n)
        row = {
            "p": int(p),
            "delta_bar": float(np.median(dbs)),
            "delta_bar_q25": float(np.quantile(dbs, 0.25)),
            "delta_bar_q75": float(np.quantile(dbs, 0.75)),
            "lower": float(np.median(los)) if los else float("nan"),
            "upper": float(np.median(his)) if his else float("nan"),
            "bracket_ok": float(np.mean(ok)) if ok else float("nan"),
            "reference": float(np.median(refs)),
            "zero_threshold": float(np.median(zts)),
        }
        rows.append(row)
    meta = {
        "kind": "threshold-curve",
        "attack": attack.value,
        "n_train": spec.n,
        "repetitions": repetitions,
        "aggregation": "median",
        "scenario": spec.as_dict(),
        "seed": spec.seed,
        "version": tool_version(),
    }
    return SweepTable(rows, meta)


# --- method comparison -----------------------------------------------------


def nmse(beta: np.ndarray, D: Dataset) -> float:
    """Test MSE divided by the variance of the test targets."""
    var = float(np.var(D.y))
    return D.mse(beta) / var if var > 0 else float("inf")


def _cv_score(method: str, D: Dataset, knob: float, attack: NormKind, folds: int, seed: int) -> float:
    perm = rng_for(seed, "cv").permutation(D.n)
    parts = np.array_split(perm, folds)
    errs = []
    for k in range(folds):
        te = parts[k]
        tr = np.concatenate([parts[j] for j in range(folds) if j != k])
        Dtr = Dataset(D.X[tr], D.y[tr])
        Dte = Dataset(D.X[te], D.y[te])
        res = fit(method, Dtr, knob, attack)
        errs.append(Dte.mse(res.beta))
    return float(np.mean(errs))


def run_compare(
    problem: Problem,
    methods: list[str],
    tuning: dict[str, str] | str = "grid",
    grid_points: int = 20,
    folds: int = 5,
    seed: int = 0,
    pivotal_K: float = 1.0,
) -> dict:
    """Best-tuned normalised test MSE per method, plus untuned minimum-norm interpolators."""
    if problem.S is not None:
        raise ValueError("compare works on plain feature matrices")
    D, T = problem.train, problem.test
    report = {"methods": [], "n_train": D.n, "p": D.p, "n_test": T.n, "version": tool_version()}
    if problem.spec is not None:
        report["scenario"] = problem.spec.as_dict()
    for name in methods:
        method, attack = parse_method(name)
        rule = tuning if isinstance(tuning, str) else tuning.get(name, "grid")
        if rule not in TUNING_RULES:
            raise ValueError(f"unknown tuning rule {rule!r}")
        label = method_label(method, attack)
        if method == "min-norm":
            continue
        if rule == "heuristic" and not (label in ("adv-linf", "sqrt-lasso")):
            rule = "cv"
        if rule == "pivotal" and label != "adv-linf":
            rule = "cv"
        if rule == "heuristic":
            knob = heuristic_delta(D.X, seed=seed) if label == "adv-linf" else heuristic_sqrt_lasso_lambda(D.X, seed=seed)
        elif rule == "pivotal":
            knob = pivotal_delta(D.n, D.p, float(np.abs(D.X).max()), pivotal_K)
        else:
            grid = default_grid(method, problem, attack, grid_points)
            if rule == "grid":
                scores = [T.mse(fit(method, D, k, attack).beta) for k in grid]
            else:
                scores = [_cv_score(method, D, k, attack, folds, seed) for k in grid]
            knob = float(grid[int(np.argmin(scores))])
        res = fit(method, D, knob, attack)
        report["methods"].append(
            {
                "method": label,
                "tuning": rule,
                "knob": float(knob),
                "nmse": nmse(np.asarray(res.beta), T),
                "converged": bool(res.converged),
            }
        )
    for attack, label in ((NormKind.Linf, "min-l1"), (NormKind.L2, "min-l2")):
        try:
            res = min_norm_interpolator(D, attack)
            entry = {"method": label, "tuning": "untuned", "knob": None, "nmse": nmse(np.asarray(res.beta), T), "converged": bool(res.converged)}
        except RankDeficientError as exc:
            entry = {"method": label, "tuning": "untuned", "knob": None, "nmse": None, "converged": False, "note": str(exc)}
        report["methods"].append(entry)
    return report
