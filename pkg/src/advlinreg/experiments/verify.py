"""Property ledger run by ``advlinreg verify``.

Each property draws ``trials`` small random instances and records the worst
observed margin (positive means the property held with room to spare).
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from ..adversarial import (
    AdvConfig,
    GeneralLossKind,
    adv_loss_general,
    adv_risk,
    adv_risk_sampled,
    base_loss,
    general_worst_case_perturbation,
    robust_colset_worst_case,
    robust_colset_worst_value,
)
from ..datagen import rng_for
from ..norms import Dataset, NormKind, norm
from ..solvers import (
    min_norm_interpolator,
    optimality_residual,
    solve_adv,
    solve_lasso,
)
from ..solvers.adv import adv_objective
from ..theory import delta_bar, delta_bar_bounds, zero_threshold


@dataclass
class PropertyResult:
    name: str
    passed: bool
    trials: int
    margin: float
    seconds: float
    note: str = ""


@dataclass
class VerifyReport:
    passed: bool
    properties: list[PropertyResult] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"passed": self.passed, "properties": [asdict(p) for p in self.properties]}


def _instance(rng: np.random.Generator, n: int, p: int) -> Dataset:
    X = rng.standard_normal((n, p))
    return Dataset(X, rng.standard_normal(n))


def _prop_dual_form(trials: int, seed: int) -> tuple[float, str]:
    rng = rng_for(seed, "verify-dual")
    worst = np.inf
    for _ in range(trials):
        n, p = int(rng.integers(1, 6)), int(rng.integers(1, 7))
        D = _instance(rng, n, p)
        beta = rng.standard_normal(p)
        for attack in (NormKind.L2, NormKind.Linf):
            cfg = AdvConfig(float(rng.uniform(0.01, 1.0)), attack)
            closed = adv_risk(beta, D, cfg)
            sampled = adv_risk_sampled(beta, D, cfg, samples=64, seed=int(rng.integers(1 << 31)), include_worst_case=False)
            hit = adv_risk_sampled(beta, D, cfg, samples=1, seed=0, include_worst_case=True)
            # sampled attacks stay below; the constructed maximiser attains it
            worst = min(worst, (closed - sampled) / max(closed, 1e-300) + 1e-12, 1e-9 - abs(hit - closed) / max(closed, 1e-300))
        for kind in GeneralLossKind:
            x, b = rng.standard_normal(p), rng.standard_normal(p)
            yv = float(rng.choice([-1.0, 1.0])) if kind.is_classification else float(rng.standard_normal())
            cfg = AdvConfig(float(rng.uniform(0.01, 1.0)), NormKind.L2 if rng.random() < 0.5 else NormKind.Linf)
            margin = cfg.delta * norm(b, cfg.regularizer)
            closed = adv_loss_general(float(x @ b), yv, margin, kind)
            dx = general_worst_case_perturbation(x, b, yv, cfg, kind)
            brute = float(base_loss(np.array([(x + dx) @ b]), kind, np.array([yv]))[0])
            worst = min(worst, 1e-9 - abs(brute - closed) / max(abs(closed), 1e-300))
    return worst, "closed form vs constructed and sampled attacks"


def _prop_transition(trials: int, seed: int, delta_bar_scale: float) -> tuple[float, str]:
    rng = rng_for(seed, "verify-transition")
    worst = np.inf
    for _ in range(trials):
        n, p = int(rng.integers(4, 9)), int(rng.integers(20, 41))
        D = _instance(rng, n, p)
        for attack in (NormKind.L2, NormKind.Linf):
            db = delta_bar(D, attack) * delta_bar_scale
            below = solve_adv(D, AdvConfig(0.9 * db, attack))
            above = solve_adv(D, AdvConfig(1.1 * db, attack))
            # interpolation below, strictly positive training error above
            worst = min(worst, 1e-6 - D.mse(below.beta), D.mse(above.beta) - 1e-6)
    return worst, "train MSE at 0.9 and 1.1 delta_bar"


def _prop_zero_threshold(trials: int, seed: int) -> tuple[float, str]:
    rng = rng_for(seed, "verify-zero")
    worst = np.inf
    for _ in range(trials):
        D = _instance(rng, int(rng.integers(3, 9)), int(rng.integers(2, 15)))
        for attack in (NormKind.L2, NormKind.Linf):
            z = zero_threshold(D, attack)
            lo = solve_adv(D, AdvConfig(0.95 * z, attack))
            hi = solve_adv(D, AdvConfig(1.05 * z, attack))
            worst = min(worst, float(np.linalg.norm(lo.beta)) - 1e-6, 1e-6 - float(np.linalg.norm(hi.beta)))
    return worst, "nonzero below, zero above"


def _prop_bracket(trials: int, seed: int) -> tuple[float, str]:
    rng = rng_for(seed, "verify-bracket")
    worst = np.inf
    for _ in range(trials):
        n = int(rng.integers(2, 10))
        D = _instance(rng, n, int(rng.integers(n, 40)))
        for attack in (NormKind.L2, NormKind.Linf):
            v = n * delta_bar(D, attack)
            lo, hi = delta_bar_bounds(D, attack)
            worst = min(worst, (v - lo) / v, (hi - v) / v)
    return worst, "singular-value bounds on n * delta_bar"


def _prop_certificate(trials: int, seed: int) -> tuple[float, str]:
    rng = rng_for(seed, "verify-cert")
    worst = np.inf
    for _ in range(trials):
        D = _instance(rng, int(rng.integers(3, 12)), int(rng.integers(2, 25)))
        for attack in (NormKind.L2, NormKind.Linf):
            cfg = AdvConfig(float(rng.uniform(0.01, 0.5)), attack)
            res = solve_adv(D, cfg)
            r = optimality_residual(res.beta, D, cfg)
            f0 = adv_objective(res.beta, D.X, D.y, None, cfg)
            pert = res.beta + 1e-3 * rng.standard_normal((20, D.p))
            vals = [adv_objective(b, D.X, D.y, None, cfg) for b in pert]
            worst = min(worst, 1e-6 - r, (min(vals) - f0) / max(abs(f0), 1e-300) + 1e-12)
    return worst, "subgradient residual and local perturbations"


def _prop_lasso_limit(trials: int, seed: int) -> tuple[float, str]:
    rng = rng_for(seed, "verify-lasso")
    worst = np.inf
    for _ in range(trials):
        n = int(rng.integers(3, 8))
        D = _instance(rng, n, int(rng.integers(n + 2, 30)))
        target = float(np.abs(min_norm_interpolator(D, NormKind.Linf).beta).sum())
        prev = 0.0
        for lam in np.geomspace(1.0, 1e-7, 8):
            b = solve_lasso(D, float(lam)).beta
            l1 = float(np.abs(b).sum())
            worst = min(worst, l1 - prev + 1e-9, target - l1 + 1e-7 * target)
            prev = l1
        worst = min(worst, 1e-3 - abs(prev - target) / target)
    return worst, "lasso l1 norm rises to the min-l1 value"


def _prop_colset(trials: int, seed: int) -> tuple[float, str]:
    rng = rng_for(seed, "verify-colset")
    worst = np.inf
    for _ in range(trials):
        D = _instance(rng, int(rng.integers(1, 8)), int(rng.integers(1, 8)))
        beta = rng.standard_normal(D.p)
        delta = float(rng.uniform(0.01, 2.0))
        Delta = robust_colset_worst_case(beta, D, delta)
        direct = float(np.linalg.norm(D.y - (D.X + Delta) @ beta))
        closed = robust_colset_worst_value(beta, D, delta)
        worst = min(worst, 1e-9 - abs(direct - closed) / max(closed, 1e-300))
    return worst, "constructed disturbance attains the closed form"


def run_verify(trials: int = 3, seed: int = 0, delta_bar_scale: float = 1.0) -> VerifyReport:
    """Run every property; ``delta_bar_scale`` perturbs the threshold (negative control)."""
    if trials < 1:
        raise ValueError("trials must be positive")
    props: list[tuple[str, Callable[[], tuple[float, str]]]] = [
        ("dual_form", lambda: _prop_dual_form(trials * 20, seed)),
        ("colset_worst_case", lambda: _prop_colset(trials * 20, seed)),
        ("delta_bar_bracket", lambda: _prop_bracket(trials * 5, seed)),
        ("interpolation_transition", lambda: _prop_transition(trials, seed, delta_bar_scale)),
        ("zero_threshold", lambda: _prop_zero_threshold(trials, seed)),
        ("certificate", lambda: _prop_certificate(trials, seed)),
        ("lasso_limit", lambda: _prop_lasso_limit(trials, seed)),
    ]
    out = []
    for name, fn in props:
        t0 = time.perf_counter()
        try:
            margin, note = fn()
            ok = bool(margin >= 0)
        except Exception as exc:  # a crash is a failed property, not a crashed ledger
            margin, note, ok = float("-inf"), f"{type(exc).__name__}: {exc}", False
        out.append(PropertyResult(name, ok, trials, float(margin), time.perf_counter() - t0, note))
    return VerifyReport(all(p.passed for p in out), out)
