"""Minimal standalone SVG line plots (no plotting-stack dependency).

Line plots only: linear or log axes, multiple labelled series, tick
labels in scientific-friendly formatting.  Output is deterministic for
identical input data.
"""

from __future__ import annotations

import math

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo, hi, log):
    if log:
        lo10 = int(math.floor(math.log10(lo)))
        hi10 = int(math.ceil(math.log10(hi)))
        step = max(1, (hi10 - lo10) // 6)
        return [10.0**e for e in range(lo10, hi10 + 1, step)]
    span = hi - lo
    raw = span / 5.0
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min(x for x in (1.0, 2.0, 5.0, 10.0) if x * mag >= raw) * mag
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-9 * span:
        out.append(0.0 if abs(v) < 1e-12 * span else v)
        v += step
    return out


def _fmt(v):
    if v == 0:
        return "0"
    a = abs(v)
    if 1e-3 <= a < 1e4:
        return f"{v:.4g}"
    return f"{v:.2e}"


class LinePlot:
    """Accumulates labelled (x, y) series and renders one SVG document."""

    def __init__(self, title="", xlabel="", ylabel="",
                 logx=False, logy=False, width=640, height=420):
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.logx = logx
        self.logy = logy
        self.width = width
        self.height = height
        self.series = []

    def add(self, x, y, label=""):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        keep = np.isfinite(x) & np.isfinite(y)
        if self.logx:
            keep &= x > 0
        if self.logy:
            keep &= y > 0
        if keep.sum() < 2:
            raise ValueError(f"series {label!r} has fewer than 2 plottable points")
        self.series.append((x[keep], y[keep], label))
        return self

    def _limits(self):
        xs = np.concatenate([s[0] for s in self.series])
        ys = np.concatenate([s[1] for s in self.series])
        def pad(lo, hi, log):
            if log:
                r = (hi / lo) ** 0.05 if hi > lo else 2.0
                return lo / r, hi * r
            span = (hi - lo) or max(abs(hi), 1.0)
            return lo - 0.05 * span, hi + 0.05 * span
        return (*pad(xs.min(), xs.max(), self.logx),
                *pad(ys.min(), ys.max(), self.logy))

    def render(self):
        if not self.series:
            raise ValueError("no series to plot")
        x0, x1, y0, y1 = self._limits()
        ml, mr, mt, mb = 78, 16, 34, 52
        pw = self.width - ml - mr
        ph = self.height - mt - mb

        def sx(v):
            t = (math.log10(v / x0) / math.log10(x1 / x0)) if self.logx \
                else (v - x0) / (x1 - x0)
            return ml + t * pw

        def sy(v):
            t = (math.log10(v / y0) / math.log10(y1 / y0)) if self.logy \
                else (v - y0) / (y1 - y0)
            return mt + (1.0 - t) * ph

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">',
            f'<rect width="{self.width}" height="{self.height}" fill="white"/>',
            f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" '
            'stroke="#444" stroke-width="1"/>',
        ]
        font = 'font-family="Helvetica,Arial,sans-serif"'
        for v in _ticks(x0, x1, self.logx):
            if not (x0 <= v <= x1):
                continue
            px = sx(v)
            out.append(f'<line x1="{px:.2f}" y1="{mt}" x2="{px:.2f}" '
                       f'y2="{mt + ph}" stroke="#ddd" stroke-width="0.7"/>')
            out.append(f'<text x="{px:.2f}" y="{mt + ph + 16}" {font} '
                       f'font-size="11" text-anchor="middle">{_fmt(v)}</text>')
        for v in _ticks(y0, y1, self.logy):
            if not (y0 <= v <= y1):
                continue
            py = sy(v)
            out.append(f'<line x1="{ml}" y1="{py:.2f}" x2="{ml + pw}" '
                       f'y2="{py:.2f}" stroke="#ddd" stroke-width="0.7"/>')
            out.append(f'<text x="{ml - 6}" y="{py + 4:.2f}" {font} '
                       f'font-size="11" text-anchor="end">{_fmt(v)}</text>')
        for i, (x, y, label) in enumerate(self.series):
            color = _COLORS[i % len(_COLORS)]
            pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                       'stroke-width="1.6"/>')
            if label:
                ly = mt + 16 + 15 * i
                out.append(f'<line x1="{ml + pw - 130}" y1="{ly - 4}" '
                           f'x2="{ml + pw - 106}" y2="{ly - 4}" '
                           f'stroke="{color}" stroke-width="1.6"/>')
                out.append(f'<text x="{ml + pw - 100}" y="{ly}" {font} '
                           f'font-size="11">{label}</text>')
        if self.title:
            out.append(f'<text x="{ml + pw / 2}" y="20" {font} font-size="14" '
                       f'text-anchor="middle">{self.title}</text>')
        if self.xlabel:
            out.append(f'<text x="{ml + pw / 2}" y="{self.height - 12}" {font} '
                       f'font-size="12" text-anchor="middle">{self.xlabel}</text>')
        if self.ylabel:
            cy = mt + ph / 2
            out.append(f'<text x="16" y="{cy}" {font} font-size="12" '
                       f'text-anchor="middle" transform="rotate(-90 16 {cy})">'
                       f'{self.ylabel}</text>')
        out.append("</svg>")
        return "\n".join(out)

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.render())
        return path
