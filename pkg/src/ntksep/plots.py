"""Minimal self-contained SVG line plots (no plotting dependency)."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")

W, H = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 160, 40, 50


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def line_plot(series: dict[str, tuple[Sequence[float], Sequence[float]]], title: str = "",
              xlabel: str = "", ylabel: str = "", logx: bool = False,
              ylim: tuple[float, float] | None = None,
              hlines: dict[str, float] | None = None) -> str:
    """Render named (xs, ys) series as polylines; returns the SVG text."""
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    pts = [(tx(x), y) for xs, ys in series.values() for x, y in zip(xs, ys)
           if math.isfinite(y) and (not logx or x > 0)]
    hl = hlines or {}
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    if ylim:
        y0, y1 = ylim
    else:
        ys = [p[1] for p in pts] + list(hl.values())
        y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def sx(v):
        return LEFT + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return TOP + (1.0 - (v - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
           'font-family="sans-serif" font-size="11">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for v in _ticks(x0, x1):
        label = f"{10 ** v:.3g}" if logx else f"{v:.4g}"
        out.append(f'<text x="{sx(v):.1f}" y="{TOP + ph + 15}" text-anchor="middle">{label}</text>')
    for v in _ticks(y0, y1):
        out.append(f'<line x1="{LEFT - 4}" y1="{sy(v):.1f}" x2="{LEFT}" y2="{sy(v):.1f}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 6}" y="{sy(v) + 4:.1f}" text-anchor="end">{v:.4g}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {TOP + ph / 2:.1f})">{escape(ylabel)}</text>')
    entries = list(series.items()) + [(k, None) for k in hl]
    for i, (name, data) in enumerate(entries):
        color = PALETTE[i % len(PALETTE)]
        if data is None:
            y = hl[name]
            out.append(f'<line x1="{LEFT}" y1="{sy(y):.2f}" x2="{LEFT + pw}" y2="{sy(y):.2f}" '
                       f'stroke="{color}" stroke-dasharray="6,4"/>')
        else:
            xs, ys = data
            coords = " ".join(f"{sx(tx(x)):.2f},{sy(y):.2f}" for x, y in zip(xs, ys)
                              if math.isfinite(y) and (not logx or x > 0))
            out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = TOP + 12 + 16 * i
        dash = ' stroke-dasharray="6,4"' if data is None else ""
        out.append(f'<line x1="{W - RIGHT + 10}" y1="{ly}" x2="{W - RIGHT + 30}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="2"{dash}/>')
        out.append(f'<text x="{W - RIGHT + 35}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
