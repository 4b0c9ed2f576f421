"""Minimal static SVG line plots (no plotting library required)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .tables import SweepTable

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        step = max(1, (b - a) // 6)
        return [float(t) for t in range(a, b + 1, step)]
    return list(np.linspace(lo, hi, 5))


def emit_svg(
    table: SweepTable,
    x: str,
    ys: list[str],
    log_x: bool = False,
    log_y: bool = False,
    marker: float | None = None,
    title: str | None = None,
    width: int = 640,
    height: int = 420,
) -> str:
    """Render one polyline per column in ``ys`` against column ``x``.

    ``marker`` draws a vertical dashed line at that x value.  Log axes need
    strictly positive data.
    """
    if len(table) == 0:
        raise ValueError("cannot plot an empty table")
    xv = table.column(x)
    series = {c: table.column(c) for c in ys}
    if log_x and np.any(xv <= 0):
        raise ValueError("log-scale x axis needs positive values")
    if log_y:
        for c, v in series.items():
            if np.any(v <= 0):
                series[c] = np.where(v > 0, v, np.nan)
    tx = np.log10(xv) if log_x else xv
    ty = {c: (np.log10(v) if log_y else v) for c, v in series.items()}
    finite = np.concatenate([v[np.isfinite(v)] for v in ty.values()] or [np.zeros(1)])
    if finite.size == 0:
        finite = np.zeros(1)
    x0, x1 = float(np.min(tx)), float(np.max(tx))
    y0, y1 = float(np.min(finite)), float(np.max(finite))
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    L, R, T, B = 70, 20, 40, 50
    pw, ph = width - L - R, height - T - B

    def sx(v: float) -> float:
        return L + (v - x0) / (x1 - x0) * pw

    def sy(v: float) -> float:
        return T + ph - (v - y0) / (y1 - y0) * ph

    meta = table.metadata
    title = title if title is not None else str(meta.get("title", meta.get("method", "")))
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{width / 2}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>',
        f'<rect x="{L}" y="{T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(x0, x1, log_x):
        if x0 <= t <= x1:
            lab = f"1e{int(t)}" if log_x else f"{t:.3g}"
            out.append(f'<text x="{sx(t):.1f}" y="{T + ph + 16}" text-anchor="middle" font-family="sans-serif" font-size="10">{lab}</text>')
    for t in _ticks(y0, y1, log_y):
        if y0 <= t <= y1:
            lab = f"1e{int(t)}" if log_y else f"{t:.3g}"
            out.append(f'<text x="{L - 6}" y="{sy(t) + 3:.1f}" text-anchor="end" font-family="sans-serif" font-size="10">{lab}</text>')
    xl = x + (" (log)" if log_x else "")
    out.append(f'<text x="{L + pw / 2}" y="{height - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(xl)}</text>')
    yl = ", ".join(ys) + (" (log)" if log_y else "")
    out.append(
        f'<text x="14" y="{T + ph / 2}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 14 {T + ph / 2})">{escape(yl)}</text>'
    )
    for k, (c, v) in enumerate(ty.items()):
        ok = np.isfinite(v) & np.isfinite(tx)
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(tx[ok], v[ok]))
        col = _COLORS[k % len(_COLORS)]
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{pts}"><title>{escape(c)}</title></polyline>')
        out.append(f'<text x="{L + pw - 4}" y="{T + 14 + 13 * k}" text-anchor="end" fill="{col}" font-family="sans-serif" font-size="11">{escape(c)}</text>')
    if marker is not None:
        if log_x and marker <= 0:
            raise ValueError("marker must be positive on a log axis")
        m = math.log10(marker) if log_x else marker
        if x0 <= m <= x1:
            out.append(f'<line x1="{sx(m):.2f}" y1="{T}" x2="{sx(m):.2f}" y2="{T + ph}" stroke="black" stroke-dasharray="4,3"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
