"""Minimal static SVG line charts for sweep output.

Only what the sweep plots need: side-by-side panels, linear or log x axis,
lines for analytic curves and markers with error bars for Monte Carlo
points.  The CSV is the data contract; these plots are a convenience.
"""

from dataclasses import dataclass, field
import math
from xml.sax.saxutils import escape

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W, _H = 420, 320
_ML, _MR, _MT, _MB = 64, 16, 30, 48


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    yerr: np.ndarray = None
    markers: bool = False


@dataclass
class Panel:
    title: str
    ylabel: str
    series: list = field(default_factory=list)


def _nice_ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / n))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (step * m) <= n:
            step *= m
            break
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step + 1e-9) + 1)]


def _fmt(v):
    return f"{v:.3g}"


def _panel_svg(panel, xlabel, log_x, ox):
    xs = np.concatenate([np.asarray(s.x, dtype=float) for s in panel.series])
    ys = []
    for s in panel.series:
        y = np.asarray(s.y, dtype=float)
        ys.append(y)
        if s.yerr is not None:
            e = np.asarray(s.yerr, dtype=float)
            ys += [y - e, y + e]
    ys = np.concatenate(ys)
    ys = ys[np.isfinite(ys)]
    xt = np.log10(xs) if log_x else xs
    x_lo, x_hi = float(np.min(xt)), float(np.max(xt))
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1, x_hi + 1
    y_lo = min(0.0, float(ys.min())) if ys.size else 0.0
    y_hi = float(ys.max()) if ys.size else 1.0
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    y_hi += 0.05 * (y_hi - y_lo)
    pw, ph = _W - _ML - _MR, _H - _MT - _MB

    def px(v):
        t = math.log10(v) if log_x else v
        return ox + _ML + (t - x_lo) / (x_hi - x_lo) * pw

    def py(v):
        return _MT + (1 - (v - y_lo) / (y_hi - y_lo)) * ph

    out = [f'<rect x="{ox + _ML}" y="{_MT}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
           f'<text x="{ox + _ML + pw / 2}" y="{_MT - 10}" text-anchor="middle" font-size="13">'
           f'{escape(panel.title)}</text>',
           f'<text x="{ox + _ML + pw / 2}" y="{_H - 10}" text-anchor="middle" font-size="12">'
           f'{escape(xlabel)}</text>',
           f'<text x="{ox + 14}" y="{_MT + ph / 2}" text-anchor="middle" font-size="12" '
           f'transform="rotate(-90 {ox + 14} {_MT + ph / 2})">{escape(panel.ylabel)}</text>']
    xticks = range(math.ceil(x_lo), math.floor(x_hi) + 1) if log_x else _nice_ticks(x_lo, x_hi)
    for t in xticks:
        v = 10.0 ** t if log_x else t
        x = px(v)
        label = f"1e{t}" if log_x else _fmt(t)
        out.append(f'<line x1="{x:.2f}" y1="{_MT + ph}" x2="{x:.2f}" y2="{_MT + ph + 4}" stroke="#444"/>')
        out.append(f'<text x="{x:.2f}" y="{_MT + ph + 16}" text-anchor="middle" font-size="10">{label}</text>')
    for t in _nice_ticks(y_lo, y_hi):
        y = py(t)
        out.append(f'<line x1="{ox + _ML - 4}" y1="{y:.2f}" x2="{ox + _ML}" y2="{y:.2f}" stroke="#444"/>')
        out.append(f'<text x="{ox + _ML - 6}" y="{y + 3:.2f}" text-anchor="end" font-size="10">{_fmt(t)}</text>')
    for i, s in enumerate(panel.series):
        color = _COLORS[i % len(_COLORS)]
        pts = [(px(a), py(b)) for a, b in zip(s.x, s.y) if np.isfinite(b)]
        if s.markers:
            err = s.yerr if s.yerr is not None else np.zeros(len(s.x))
            for a, b, e in zip(s.x, s.y, err):
                if not np.isfinite(b):
                    continue
                x = px(a)
                if e > 0:
                    out.append(f'<line x1="{x:.2f}" y1="{py(b - e):.2f}" x2="{x:.2f}" y2="{py(b + e):.2f}" '
                               f'stroke="{color}"/>')
                out.append(f'<circle cx="{x:.2f}" cy="{py(b):.2f}" r="2.5" fill="{color}"/>')
        elif pts:
            path = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = _MT + 14 + 14 * i
        out.append(f'<text x="{ox + _ML + pw - 6}" y="{ly}" text-anchor="end" font-size="10" '
                   f'fill="{color}">{escape(s.label)}</text>')
    return out


def render(panels, xlabel, log_x=False):
    """SVG document text with ``panels`` laid out left to right."""
    width = _W * len(panels)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{_H}" '
             f'viewBox="0 0 {width} {_H}" font-family="sans-serif">',
             f'<rect width="{width}" height="{_H}" fill="white"/>']
    for i, panel in enumerate(panels):
        parts += _panel_svg(panel, xlabel, log_x, i * _W)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
