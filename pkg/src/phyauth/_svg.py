"""Minimal self-contained SVG line plots (no plotting dependency)."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
W, H = 640, 440
ML, MR, MT, MB = 70, 170, 40, 55


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not hi > lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    return [round(v, 12) for v in np.arange(start, hi + 0.5 * step, step)]


def line_plot(path, series: Sequence[tuple[str, Sequence[float], Sequence[float]]], title: str = "",
              xlabel: str = "", ylabel: str = "", logy: bool = False) -> Path:
    """Write one SVG with a polyline per ``(label, x, y)`` series."""
    xs = np.concatenate([np.asarray(s[1], float) for s in series]) if series else np.zeros(1)
    ys = np.concatenate([np.asarray(s[2], float) for s in series]) if series else np.zeros(1)
    finite = np.isfinite(ys) & ((ys > 0) if logy else True)

    def ty(v):
        return np.log10(v) if logy else v

    x_lo, x_hi = float(np.min(xs)), float(np.max(xs))
    if finite.any():
        y_lo, y_hi = float(np.min(ty(ys[finite]))), float(np.max(ty(ys[finite])))
    else:
        y_lo, y_hi = 0.0, 1.0
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pw, ph = W - ML - MR, H - MT - MB

    def px(v):
        return ML + (v - x_lo) / (x_hi - x_lo) * pw

    def py(v):
        return MT + ph - (v - y_lo) / (y_hi - y_lo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
           'font-family="sans-serif" font-size="11">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
           f'<text x="{ML + pw / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<text x="{ML + pw / 2:.1f}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>',
           f'<text x="16" y="{MT + ph / 2:.1f}" text-anchor="middle" '
           f'transform="rotate(-90 16 {MT + ph / 2:.1f})">{escape(ylabel)}</text>']
    for t in _nice_ticks(x_lo, x_hi):
        out.append(f'<line x1="{px(t):.1f}" y1="{MT + ph}" x2="{px(t):.1f}" y2="{MT + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{px(t):.1f}" y="{MT + ph + 16}" text-anchor="middle">{t:g}</text>')
    for t in _nice_ticks(y_lo, y_hi):
        label = f"1e{t:g}" if logy else f"{t:g}"
        out.append(f'<line x1="{ML - 4}" y1="{py(t):.1f}" x2="{ML}" y2="{py(t):.1f}" stroke="black"/>')
        out.append(f'<text x="{ML - 6}" y="{py(t) + 4:.1f}" text-anchor="end">{label}</text>')
    for i, (label, x, y) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        x, y = np.asarray(x, float), np.asarray(y, float)
        ok = np.isfinite(y) & ((y > 0) if logy else True)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], ty(y[ok])))
        if pts:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = MT + 14 + 16 * i
        out.append(f'<line x1="{W - MR + 12}" y1="{ly - 4}" x2="{W - MR + 32}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{W - MR + 36}" y="{ly}">{escape(str(label))}</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path
