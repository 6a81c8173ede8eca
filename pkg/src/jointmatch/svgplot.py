"""Deterministic, dependency-free SVG scatter plots.

Output depends only on the input arrays and labels: fixed canvas, fixed
float formatting, no timestamps or generated ids, so identical inputs give
byte-identical files that diff cleanly.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .persistence import atomic_write_bytes

__all__ = ["scatter_svg", "write_scatter_svg", "PALETTE"]

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"]

_WIDTH = 560
_HEIGHT = 480
_MARGIN = 46
_LEGEND_ROW = 18


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def scatter_svg(series, title: str = "", subtitle: str = "") -> str:
    """Render labeled 2-D point sets. `series` is [(label, points, color)].

    Colors may be None to pick from the palette. Returns the SVG text.
    """
    prepared = []
    for idx, (label, points, color) in enumerate(series):
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"series {label!r}: points must have shape (n, 2), got {pts.shape}")
        prepared.append((str(label), pts, color or PALETTE[idx % len(PALETTE)]))
    if not prepared:
        raise ValueError("scatter_svg: need at least one series")

    stacked = np.vstack([pts for _, pts, _ in prepared])
    lo = stacked.min(axis=0)
    hi = stacked.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    pad = 0.05 * span
    lo, hi = lo - pad, hi + pad
    span = hi - lo

    def sx(v: float) -> float:
        return _MARGIN + (v - lo[0]) / span[0] * (_WIDTH - 2 * _MARGIN)

    def sy(v: float) -> float:
        return _HEIGHT - _MARGIN - (v - lo[1]) / span[1] * (_HEIGHT - 2 * _MARGIN)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{_WIDTH - 2 * _MARGIN}" '
        f'height="{_HEIGHT - 2 * _MARGIN}" fill="none" stroke="#999" stroke-width="1"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_WIDTH // 2}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="15">{escape(title)}</text>'
        )
    if subtitle:
        parts.append(
            f'<text x="{_WIDTH // 2}" y="40" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11" fill="#555">{escape(subtitle)}</text>'
        )
    for axis_val, anchor in ((lo, "start"), (hi, "end")):
        parts.append(
            f'<text x="{sx(axis_val[0]):.1f}" y="{_HEIGHT - _MARGIN + 16}" '
            f'text-anchor="{anchor}" font-family="sans-serif" font-size="10" '
            f'fill="#555">{_fmt(axis_val[0])}</text>'
        )
        parts.append(
            f'<text x="{_MARGIN - 4}" y="{sy(axis_val[1]):.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10" '
            f'fill="#555">{_fmt(axis_val[1])}</text>'
        )
    for label, pts, color in prepared:
        dots = "".join(
            f'<circle cx="{sx(px):.2f}" cy="{sy(py):.2f}" r="2.2" fill="{color}" '
            f'fill-opacity="0.55"/>'
            for px, py in pts
        )
        parts.append(f"<g>{dots}</g>")
    legend_y = _MARGIN + 6
    for label, _, color in prepared:
        parts.append(
            f'<circle cx="{_WIDTH - _MARGIN - 130}" cy="{legend_y}" r="4" fill="{color}"/>'
        )
        parts.append(
            f'<text x="{_WIDTH - _MARGIN - 120}" y="{legend_y + 4}" '
            f'font-family="sans-serif" font-size="11">{escape(label)}</text>'
        )
        legend_y += _LEGEND_ROW
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_scatter_svg(path: str, series, title: str = "", subtitle: str = "") -> None:
    atomic_write_bytes(path, scatter_svg(series, title, subtitle).encode())
