"""Minimal static SVG charts (heatmap, line plot with error bars).

Output is plain text with fixed number formatting, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _f(x: float) -> str:
    return f"{x:.2f}"


def _doc(width: int, height: int, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">')
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>', *body, "</svg>", ""])


def _text(x, y, s, anchor="middle", size=None, extra=""):
    sz = f' font-size="{size}"' if size else ""
    return f'<text x="{_f(x)}" y="{_f(y)}" text-anchor="{anchor}"{sz}{extra}>{escape(str(s))}</text>'


def _color(v: float, vmin: float, vmax: float) -> str:
    """White to dark blue ramp; NaN is grey."""
    if not np.isfinite(v):
        return "#cccccc"
    t = 0.0 if vmax == vmin else min(max((v - vmin) / (vmax - vmin), 0.0), 1.0)
    r = round(255 + t * (8 - 255))
    g = round(255 + t * (48 - 255))
    b = round(255 + t * (107 - 255))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap(values, row_labels: Sequence[str], col_labels: Sequence[str], title: str = "",
            vmin: float = 0.0, vmax: float = 1.0, cell: int = 44) -> str:
    values = np.asarray(values, dtype=float)
    n_rows, n_cols = values.shape
    left, top = 70, 40
    width, height = left + n_cols * cell + 20, top + n_rows * cell + 30
    body = [_text(width / 2, 22, title, size=13)]
    for r in range(n_rows):
        body.append(_text(left - 6, top + r * cell + cell / 2 + 4, row_labels[r], anchor="end"))
        for c in range(n_cols):
            v = values[r, c]
            x, y = left + c * cell, top + r * cell
            body.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                        f'fill="{_color(v, vmin, vmax)}" stroke="white"/>')
            t = (v - vmin) / (vmax - vmin) if vmax != vmin and np.isfinite(v) else 0.0
            fill = ' fill="white"' if t > 0.6 else ""
            label = f"{100 * v:.0f}" if np.isfinite(v) else "-"
            body.append(_text(x + cell / 2, y + cell / 2 + 4, label, extra=fill))
    for c in range(n_cols):
        body.append(_text(left + c * cell + cell / 2, top + n_rows * cell + 16, col_labels[c]))
    return _doc(width, height, body)


def line_plot(x, series: Mapping[str, tuple], xlabel: str = "", ylabel: str = "", title: str = "",
              ylim: tuple[float, float] | None = None, width: int = 520, height: int = 340) -> str:
    """``series`` maps a name to ``(y, err)``; ``err`` may be None."""
    x = np.asarray(x, dtype=float)
    left, right, top, bottom = 60, 130, 36, 46
    pw, ph = width - left - right, height - top - bottom
    ys = [np.asarray(y, float) for y, _ in series.values()]
    errs = [np.zeros_like(y) if e is None else np.asarray(e, float) for (y, e), y in zip(series.values(), ys)]
    if ylim is None:
        lo = min(float(np.nanmin(y - e)) for y, e in zip(ys, errs))
        hi = max(float(np.nanmax(y + e)) for y, e in zip(ys, errs))
        pad = 0.05 * (hi - lo or 1.0)
        ylim = (lo - pad, hi + pad)
    x0, x1 = float(x.min()), float(x.max())
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + ph - (v - ylim[0]) / (ylim[1] - ylim[0]) * ph

    body = [_text(left + pw / 2, 20, title, size=13),
            f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for k in range(5):
        v = ylim[0] + k * (ylim[1] - ylim[0]) / 4
        body.append(f'<line x1="{left - 4}" y1="{_f(py(v))}" x2="{left}" y2="{_f(py(v))}" stroke="black"/>')
        body.append(_text(left - 7, py(v) + 4, f"{v:.2f}", anchor="end"))
    for v in x:
        body.append(f'<line x1="{_f(px(v))}" y1="{top + ph}" x2="{_f(px(v))}" y2="{top + ph + 4}" stroke="black"/>')
        body.append(_text(px(v), top + ph + 16, f"{v:g}"))
    body.append(_text(left + pw / 2, height - 8, xlabel))
    body.append(_text(14, top + ph / 2, ylabel, extra=f' transform="rotate(-90 14 {_f(top + ph / 2)})"'))
    for k, ((name, _), y, e) in enumerate(zip(series.items(), ys, errs)):
        col = _PALETTE[k % len(_PALETTE)]
        pts = " ".join(f"{_f(px(a))},{_f(py(b))}" for a, b in zip(x, y))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        for a, b, d in zip(x, y, e):
            if d > 0:
                body.append(f'<line x1="{_f(px(a))}" y1="{_f(py(b - d))}" x2="{_f(px(a))}" '
                            f'y2="{_f(py(b + d))}" stroke="{col}"/>')
            body.append(f'<circle cx="{_f(px(a))}" cy="{_f(py(b))}" r="2.5" fill="{col}"/>')
        ly = top + 12 + 16 * k
        body.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 26}" y2="{ly}" stroke="{col}" stroke-width="2"/>')
        body.append(_text(left + pw + 30, ly + 4, name, anchor="start"))
    return _doc(width, height, body)


def write_svg(text: str, path: str | Path) -> None:
    Path(path).write_text(text)
