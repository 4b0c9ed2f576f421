"""Seeded synthetic scenarios, CSV ingestion, normalisation and splitting.

Random streams
--------------
Every draw comes from numpy's PCG64 generator seeded with
``SeedSequence([seed, crc32(purpose)])``, where ``purpose`` is a short ASCII
tag such as ``"X"``, ``"eps"`` or ``"beta"``.  Streams for different purposes
are therefore independent, and each is reproducible from ``(seed, purpose)``
alone.
"""

from __future__ import annotations

import csv
import enum
import warnings
import zlib
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .norms import Dataset

__all__ = [
    "ScenarioKind",
    "ScenarioSpec",
    "Truth",
    "LabeledSplit",
    "ProjectionSplit",
    "rng_for",
    "gen_gaussian",
    "gen_latent",
    "gen_fourier",
    "gen_projection",
    "generate",
    "load_csv",
    "load_diabetes",
    "normalize",
    "split",
    "CsvFormatError",
    "MissingColumnError",
    "NonNumericCellError",
    "RaggedRowError",
    "ConstantColumnWarning",
]

DEFAULT_TEST_SIZE = 10_000


class ScenarioKind(enum.Enum):
    Gaussian = "gaussian"
    Latent = "latent"
    FourierFeatures = "fourier"
    RandomProjection = "projection"
    CsvFile = "csv"


@dataclass(frozen=True)
class ScenarioSpec:
    """Parameters of one synthetic or file-backed scenario.

    ``d`` is the latent dimension (Latent) or the ambient input dimension
    (RandomProjection).  ``sparsity`` switches the Gaussian coefficient
    vector to ``k`` entries equal to +-1.
    """

    kind: ScenarioKind = ScenarioKind.Gaussian
    n: int = 60
    p: int = 200
    sigma: float = 1.0
    r: float = 1.0
    d: int | None = None
    sigma_w: float = 0.01
    u_scale: float = 1.0
    sparsity: int | None = None
    n_test: int = DEFAULT_TEST_SIZE
    path: str | None = None
    target: str | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ScenarioKind(self.kind))
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be positive")
        if self.sigma < 0 or self.r < 0 or self.sigma_w < 0 or self.u_scale < 0:
            raise ValueError("scale parameters must be nonnegative")
        if self.n_test < 0:
            raise ValueError("n_test must be nonnegative")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.kind is ScenarioKind.Latent and self.latent_dim > self.p:
            raise ValueError(f"latent dimension d={self.latent_dim} exceeds p={self.p}")
        if self.kind is ScenarioKind.RandomProjection and self.p > self.ambient_dim:
            raise ValueError(f"p={self.p} exceeds ambient dimension d={self.ambient_dim}")
        if self.sparsity is not None and not 0 < self.sparsity <= self.p:
            raise ValueError("sparsity must be in 1..p")

    @property
    def latent_dim(self) -> int:
        return 1 if self.d is None else int(self.d)

    @property
    def ambient_dim(self) -> int:
        return 1000 if self.d is None else int(self.d)

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["kind"] = self.kind.value
        return out


@dataclass(frozen=True)
class Truth:
    """Ground truth of a synthetic draw; ``eps`` is the noise realised on the training rows."""

    beta_star: np.ndarray | None = None
    eps: np.ndarray | None = None
    theta: np.ndarray | None = None
    extras: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class LabeledSplit:
    train: Dataset
    test: Dataset
    truth: Truth | None = None

    def __post_init__(self) -> None:
        if self.train.p != self.test.p:
            raise ValueError("train and test feature dimensions differ")


@dataclass(frozen=True)
class ProjectionSplit:
    """Raw ambient-dimension data together with the projection matrix ``S`` (p x d)."""

    raw: LabeledSplit
    S: np.ndarray

    def projected(self) -> LabeledSplit:
        """The same split with features ``X @ S.T``."""
        St = self.S.T
        return LabeledSplit(
            Dataset(self.raw.train.X @ St, self.raw.train.y),
            Dataset(self.raw.test.X @ St, self.raw.test.y),
            self.raw.truth,
        )


def rng_for(seed: int, purpose: str) -> np.random.Generator:
    """Independent, reproducible generator for one ``(seed, purpose)`` pair."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(purpose.encode("ascii"))])
    return np.random.Generator(np.random.PCG64(ss))


def _as_spec(spec: ScenarioSpec | None, **kw) -> ScenarioSpec:
    spec = spec or ScenarioSpec()
    return replace(spec, **kw) if kw else spec


def gen_gaussian(spec: ScenarioSpec | None = None, **overrides) -> LabeledSplit:
    """Isotropic Gaussian features ``x ~ N(0, r^2 I)`` and ``y = x @ beta* + eps``.

    ``beta*`` is standard normal rescaled to unit l2 norm, or ``k`` entries of
    +-1 at random positions when ``spec.sparsity = k``.
    """
    spec = _as_spec(spec, **overrides)
    n, p, m = spec.n, spec.p, spec.n_test
    if spec.sparsity is None:
        b = rng_for(spec.seed, "beta").standard_normal(p)
        beta = b / np.linalg.norm(b)
    else:
        g = rng_for(spec.seed, "beta")
        beta = np.zeros(p)
        idx = g.choice(p, size=spec.sparsity, replace=False)
        beta[idx] = g.choice([-1.0, 1.0], size=spec.sparsity)
    X = spec.r * rng_for(spec.seed, "X").standard_normal((n, p))
    eps = spec.sigma * rng_for(spec.seed, "eps").standard_normal(n)
    Xt = spec.r * rng_for(spec.seed, "X-test").standard_normal((m, p))
    et = spec.sigma * rng_for(spec.seed, "eps-test").standard_normal(m)
    return LabeledSplit(Dataset(X, X @ beta + eps), Dataset(Xt, Xt @ beta + et), Truth(beta_star=beta, eps=eps))


def latent_map(p: int, d: int, seed: int) -> np.ndarray:
    """``W`` (p x d) with orthogonal columns and ``W.T @ W = (p/d) I``."""
    G = rng_for(seed, "W").standard_normal((p, d))
    Q, _ = np.linalg.qr(G, mode="reduced")
    return Q * np.sqrt(p / d)


def gen_latent(spec: ScenarioSpec | None = None, **overrides) -> LabeledSplit:
    """Latent-factor features ``x = W z + u`` with ``y = theta @ z + xi``.

    ``z ~ N(0, I_d)``, ``u ~ N(0, u_scale^2 I_p)``, ``xi ~ N(0, sigma^2)`` and
    ``theta`` is the all-ones vector divided by ``sqrt(d)``.
    """
    spec = _as_spec(spec, kind=ScenarioKind.Latent, **overrides)
    n, p, m, d = spec.n, spec.p, spec.n_test, spec.latent_dim
    W = latent_map(p, d, spec.seed)
    theta = np.ones(d) / np.sqrt(d)

    def draw(rows: int, tag: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        z = rng_for(spec.seed, "z" + tag).standard_normal((rows, d))
        u = spec.u_scale * rng_for(spec.seed, "u" + tag).standard_normal((rows, p))
        xi = spec.sigma * rng_for(spec.seed, "xi" + tag).standard_normal(rows)
        return z @ W.T + u, z @ theta + xi, xi

    X, y, xi = draw(n, "")
    Xt, yt, _ = draw(m, "-test")
    return LabeledSplit(Dataset(X, y), Dataset(Xt, yt), Truth(eps=xi, theta=theta, extras={"W": W}))


def fourier_features(Z: np.ndarray, m: int, sigma_w: float, seed: int) -> np.ndarray:
    """``sqrt(2/m) cos(Z @ W.T + b)`` with ``W ~ N(0, sigma_w^2)`` and ``b ~ U[0, 2 pi)``."""
    Z = np.asarray(Z, dtype=float)
    W = sigma_w * rng_for(seed, "rff-W").standard_normal((m, Z.shape[1]))
    b = rng_for(seed, "rff-b").uniform(0.0, 2.0 * np.pi, size=m)
    return np.sqrt(2.0 / m) * np.cos(Z @ W.T + b)


def gen_fourier(
    spec: ScenarioSpec | None = None,
    base_inputs: np.ndarray | None = None,
    base_targets: np.ndarray | None = None,
    **overrides,
) -> LabeledSplit:
    """Random Fourier features of fixed base inputs; targets are kept unchanged.

    Without base data the bundled diabetes table is used.  Rows are permuted
    with the seed; the first ``spec.n`` form the training set and up to
    ``spec.n_test`` of the remainder the test set.  ``spec.p`` is the number
    of features ``m``.
    """
    spec = _as_spec(spec, kind=ScenarioKind.FourierFeatures, **overrides)
    if base_inputs is None:
        base = load_diabetes()
        base_inputs, base_targets = base.X, base.y
    Z = np.asarray(base_inputs, dtype=float)
    if Z.ndim != 2 or Z.shape[0] == 0:
        raise ValueError("base_inputs must be a nonempty 2-d array")
    y = np.zeros(Z.shape[0]) if base_targets is None else np.asarray(base_targets, dtype=float).ravel()
    if y.shape[0] != Z.shape[0]:
        raise ValueError("base_targets length does not match base_inputs")
    if spec.n >= Z.shape[0]:
        raise ValueError(f"n={spec.n} leaves no test rows out of {Z.shape[0]}")
    F = fourier_features(Z, spec.p, spec.sigma_w, spec.seed)
    perm = rng_for(spec.seed, "perm").permutation(Z.shape[0])
    tr = perm[: spec.n]
    te = perm[spec.n : spec.n + max(spec.n_test, 1)]
    return LabeledSplit(Dataset(F[tr], y[tr]), Dataset(F[te], y[te]), None)


def gen_projection(spec: ScenarioSpec | None = None, **overrides) -> ProjectionSplit:
    """Gaussian inputs in ambient dimension ``d`` seen through a Rademacher map ``S`` (p x d).

    ``y = x @ S.T @ theta + eps`` with ``x ~ N(0, I_d)``; ``theta`` is scaled
    so that ``||S.T @ theta||_2 = 1``.
    """
    spec = _as_spec(spec, kind=ScenarioKind.RandomProjection, **overrides)
    n, p, m, d = spec.n, spec.p, spec.n_test, spec.ambient_dim
    S = rng_for(spec.seed, "S").choice([-1.0, 1.0], size=(p, d))
    t = rng_for(spec.seed, "theta").standard_normal(p)
    theta = t / np.linalg.norm(S.T @ t)
    w = S.T @ theta
    X = rng_for(spec.seed, "X").standard_normal((n, d))
    eps = spec.sigma * rng_for(spec.seed, "eps").standard_normal(n)
    Xt = rng_for(spec.seed, "X-test").standard_normal((m, d))
    et = spec.sigma * rng_for(spec.seed, "eps-test").standard_normal(m)
    raw = LabeledSplit(Dataset(X, X @ w + eps), Dataset(Xt, Xt @ w + et), Truth(eps=eps, theta=theta, beta_star=w))
    return ProjectionSplit(raw, S)


# --- CSV ------------------------------------------------------------------


class CsvFormatError(ValueError):
    pass


class MissingColumnError(CsvFormatError, KeyError):
    def __str__(self) -> str:  # KeyError would quote the message
        return str(self.args[0]) if self.args else ""


class NonNumericCellError(CsvFormatError):
    pass


class RaggedRowError(CsvFormatError):
    pass


def load_csv(path: str | Path, target_column: str) -> Dataset:
    """Read a headered numeric CSV; the target column becomes ``y``, the rest ``X`` in header order."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"CSV file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        if target_column not in header:
            raise MissingColumnError(f"{path}: target column {target_column!r} not in header {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise RaggedRowError(f"{path}, line {lineno}: expected {len(header)} fields, found {len(row)}")
            vals = []
            for col, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise NonNumericCellError(f"{path}, line {lineno}, column {col!r}: not a number: {cell!r}") from None
                if not np.isfinite(v):
                    raise NonNumericCellError(f"{path}, line {lineno}, column {col!r}: non-finite value {cell!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    A = np.array(rows)
    t = header.index(target_column)
    keep = [j for j in range(len(header)) if j != t]
    if not keep:
        raise CsvFormatError(f"{path}: no feature columns besides the target")
    return Dataset(A[:, keep], A[:, t])


def load_diabetes() -> Dataset:
    """Bundled diabetes table: 442 patients, 10 baseline variables, disease-progression target."""
    ref = resources.files("advlinreg") / "data" / "diabetes.csv"
    with resources.as_file(ref) as p:
        return load_csv(p, "target")


class ConstantColumnWarning(UserWarning):
    pass


def normalize(D: Dataset, center_y: bool = False) -> Dataset:
    """Center every column of ``X`` and scale it to unit standard deviation.

    Constant columns are centered (hence zero) and left with scale 1; a
    :class:`ConstantColumnWarning` is issued for them.  ``y`` is untouched
    unless ``center_y``.
    """
    if D.n < 2:
        raise ValueError("normalize needs at least two rows")
    X = D.X - D.X.mean(axis=0)
    sd = X.std(axis=0)
    const = sd <= 1e-12 * max(1.0, float(np.abs(D.X).max()))
    if np.any(const):
        warnings.warn(f"constant columns left unscaled: {np.flatnonzero(const).tolist()}", ConstantColumnWarning, stacklevel=2)
        X[:, const] = 0.0
    sd[const] = 1.0
    X = X / sd
    y = D.y - D.y.mean() if center_y else D.y
    return Dataset(X, y)


def split(D: Dataset, fraction: float, seed: int = 0) -> LabeledSplit:
    """Seeded random partition; ``fraction`` of the rows (at least one) go to training."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie strictly between 0 and 1")
    if D.n < 2:
        raise ValueError("need at least two rows to split")
    perm = rng_for(seed, "split").permutation(D.n)
    k = min(max(int(round(fraction * D.n)), 1), D.n - 1)
    tr, te = perm[:k], perm[k:]
    return LabeledSplit(Dataset(D.X[tr], D.y[tr]), Dataset(D.X[te], D.y[te]), None)


def generate(spec: ScenarioSpec) -> LabeledSplit:
    """Dispatch on ``spec.kind``; projections are returned already projected."""
    kind = spec.kind
    if kind is ScenarioKind.Gaussian:
        return gen_gaussian(spec)
    if kind is ScenarioKind.Latent:
        return gen_latent(spec)
    if kind is ScenarioKind.FourierFeatures:
        return gen_fourier(spec)
    if kind is ScenarioKind.RandomProjection:
        return gen_projection(spec).projected()
    if spec.path is None or spec.target is None:
        raise ValueError("csv scenario needs path and target")
    D = load_csv(spec.path, spec.target)
    return split(D, spec.n / D.n if spec.n < D.n else 0.8, spec.seed)
