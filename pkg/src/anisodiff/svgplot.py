"""Tiny SVG renderer: line plots and heatmaps, nothing else.

Plots are derived artifacts; the CSVs next to them are the testable
contract.  Keeping the renderer dependency-free and dumb makes the
graphical output reproducible enough to eyeball without pulling a
plotting stack into the package.
"""
from __future__ import annotations

import math

_W, _H = 640, 480
_ML, _MR, _MT, _MB = 70, 20, 30, 50

# five-stop blue-to-yellow ramp, close enough to the usual perceptual maps
_RAMP = [(68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37)]


def _ramp_color(u: float) -> str:
    u = min(max(u, 0.0), 1.0)
    s = u * (len(_RAMP) - 1)
    i = min(int(s), len(_RAMP) - 2)
    f = s - i
    r, g, b = (round(a + f * (b_ - a)) for a, b_ in zip(_RAMP[i], _RAMP[i + 1]))
    return f"rgb({r},{g},{b})"


def _fmt(v: float) -> str:
    return f"{v:.4g}"


class _Axes:
    def __init__(self, xmin, xmax, ymin, ymax, logx=False):
        if logx:
            xmin, xmax = math.log10(xmin), math.log10(xmax)
        self.xmin, self.xmax = xmin, xmax
        self.ymin, self.ymax = ymin, ymax
        self.logx = logx

    def px(self, x):
        if self.logx:
            x = math.log10(x)
        f = (x - self.xmin) / (self.xmax - self.xmin or 1.0)
        return _ML + f * (_W - _ML - _MR)

    def py(self, y):
        f = (y - self.ymin) / (self.ymax - self.ymin or 1.0)
        return _H - _MB - f * (_H - _MT - _MB)


def _frame(parts, ax: _Axes, title, xlabel, ylabel):
    parts.append(f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
                 f'height="{_H - _MT - _MB}" fill="none" stroke="#888"/>')
    x0 = 10 ** ax.xmin if ax.logx else ax.xmin
    x1 = 10 ** ax.xmax if ax.logx else ax.xmax
    parts.append(f'<text x="{_ML}" y="{_H - _MB + 20}" font-size="12">{_fmt(x0)}</text>')
    parts.append(f'<text x="{_W - _MR - 30}" y="{_H - _MB + 20}" font-size="12">{_fmt(x1)}</text>')
    parts.append(f'<text x="{_ML - 8}" y="{_H - _MB}" font-size="12" '
                 f'text-anchor="end">{_fmt(ax.ymin)}</text>')
    parts.append(f'<text x="{_ML - 8}" y="{_MT + 12}" font-size="12" '
                 f'text-anchor="end">{_fmt(ax.ymax)}</text>')
    parts.append(f'<text x="{_W / 2}" y="{_H - 12}" font-size="13" '
                 f'text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="16" y="{_H / 2}" font-size="13" text-anchor="middle" '
                 f'transform="rotate(-90 16 {_H / 2})">{ylabel}</text>')
    parts.append(f'<text x="{_W / 2}" y="20" font-size="14" '
                 f'text-anchor="middle">{title}</text>')


def line_plot_svg(x, series, title="", xlabel="", ylabel="", logx=False) -> str:
    """series: list of (label, y-values, css-color) over the common x grid."""
    xs = list(x)
    ys_all = [v for _, ys, _ in series for v in ys]
    ax = _Axes(min(xs), max(xs), min(ys_all), max(ys_all), logx=logx)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}">',
             f'<rect width="{_W}" height="{_H}" fill="white"/>']
    _frame(parts, ax, title, xlabel, ylabel)
    for li, (label, ys, color) in enumerate(series):
        pts = " ".join(f"{ax.px(xv):.2f},{ax.py(yv):.2f}" for xv, yv in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.8"/>')
        if label:
            ly = _MT + 18 + 16 * li
            parts.append(f'<line x1="{_W - _MR - 120}" y1="{ly - 4}" '
                         f'x2="{_W - _MR - 95}" y2="{ly - 4}" stroke="{color}" '
                         f'stroke-width="1.8"/>')
            parts.append(f'<text x="{_W - _MR - 90}" y="{ly}" '
                         f'font-size="12">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def heatmap_svg(values, extent, title="", xlabel="", ylabel="") -> str:
    """values[i][j] heatmap; extent = (xmin, xmax, ymin, ymax), i along x."""
    nx = len(values)
    ny = len(values[0])
    flat = [v for row in values for v in row]
    vmin, vmax = min(flat), max(flat)
    span = (vmax - vmin) or 1.0
    xmin, xmax, ymin, ymax = extent
    ax = _Axes(xmin, xmax, ymin, ymax)
    cw = (_W - _ML - _MR) / nx
    ch = (_H - _MT - _MB) / ny
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}">',
             f'<rect width="{_W}" height="{_H}" fill="white"/>']
    for i in range(nx):
        for j in range(ny):
            u = (values[i][j] - vmin) / span
            px = _ML + i * cw
            py = _H - _MB - (j + 1) * ch
            parts.append(f'<rect x="{px:.2f}" y="{py:.2f}" width="{cw + 0.5:.2f}" '
                         f'height="{ch + 0.5:.2f}" fill="{_ramp_color(u)}"/>')
    _frame(parts, ax, title, xlabel, ylabel)
    parts.append(f'<text x="{_W - _MR}" y="{_MT - 8}" font-size="11" text-anchor="end">'
                 f'range [{_fmt(vmin)}, {_fmt(vmax)}]</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
