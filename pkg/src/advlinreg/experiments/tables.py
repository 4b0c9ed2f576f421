"""Tabular experiment output.

A table is a list of row dicts plus a metadata dict.  On disk it is a CSV
file whose first line is ``# meta: <json>`` so that every figure can be
regenerated from its own file.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

META_PREFIX = "# meta: "


def _jsonable(v: Any) -> Any:
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if hasattr(v, "value") and not isinstance(v, (str, int, bool)):
        return v.value
    return v


@dataclass
class SweepTable:
    rows: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def columns(self) -> list[str]:
        cols: list[str] = []
        for r in self.rows:
            for k in r:
                if k not in cols:
                    cols.append(k)
        return cols

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def coefficients(self) -> np.ndarray:
        names = [c for c in self.columns if c.startswith("coef_") and c[5:].isdigit()]
        names.sort(key=lambda c: int(c[5:]))
        return np.array([[r[c] for c in names] for r in self.rows], dtype=float)

    def check_monotone(self, name: str = "knob") -> None:
        x = self.column(name)
        d = np.diff(x)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError(f"column {name!r} is not strictly monotone")

    def to_csv(self, target: str | Path | io.TextIOBase | None = None) -> str:
        buf = io.StringIO()
        buf.write(META_PREFIX + json.dumps(_jsonable(self.metadata), sort_keys=True) + "\n")
        cols = self.columns
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: _fmt(r.get(k, "")) for k in cols})
        text = buf.getvalue()
        if isinstance(target, (str, Path)):
            Path(target).write_text(text, encoding="utf-8")
        elif target is not None:
            target.write(text)
        return text

    @classmethod
    def from_csv(cls, source: str | Path) -> "SweepTable":
        text = Path(source).read_text(encoding="utf-8")
        lines = text.splitlines()
        meta = {}
        if lines and lines[0].startswith(META_PREFIX):
            meta = json.loads(lines[0][len(META_PREFIX):])
            lines = lines[1:]
        rows = []
        for r in csv.DictReader(lines):
            rows.append({k: _parse(v) for k, v in r.items()})
        return cls(rows, meta)


def _fmt(v: Any) -> Any:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    return v


def _parse(v: str) -> Any:
    try:
        return float(v)
    except (TypeError, ValueError):
        return v


def write_json(obj: Any, target: str | Path | None) -> str:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True)
    if target is not None:
        Path(target).write_text(text + "\n", encoding="utf-8")
    return text


def median_rows(tables: Iterable[SweepTable], key: str, columns: list[str]) -> list[dict]:
    """Row-wise median (and quartiles) of ``columns`` across tables sharing the same ``key`` grid."""
    tables = list(tables)
    out = []
    for i, row in enumerate(tables[0].rows):
        new = {key: row[key]}
        for c in columns:
            vals = np.array([t.rows[i][c] for t in tables], dtype=float)
            new[c] = float(np.median(vals))
            new[c + "_q25"] = float(np.quantile(vals, 0.25))
            new[c + "_q75"] = float(np.quantile(vals, 0.75))
        out.append(new)
    return out
