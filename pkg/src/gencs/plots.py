"""Self-contained SVG line plots, written with fixed-precision coordinates so
identical inputs give byte-identical files."""
from __future__ import annotations

import math
import os
from statistics import median
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 150, 40, 60
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


class PlotError(ValueError):
    pass


def _c(v: float) -> str:
    return f"{v:.2f}"


class _Axes:
    def __init__(self, xlim, ylim, xlog: bool, ylog: bool):
        self.xlog, self.ylog = xlog, ylog
        self.x0, self.x1 = self._span(xlim, xlog)
        self.y0, self.y1 = self._span(ylim, ylog)

    @staticmethod
    def _span(lim, log):
        lo, hi = (math.log10(v) for v in lim) if log else lim
        if hi <= lo:
            pad = 0.5 if log else max(abs(lo) * 0.1, 0.5)
            lo, hi = lo - pad, hi + pad
        return lo, hi

    def px(self, x: float) -> float:
        t = (math.log10(x) if self.xlog else x) - self.x0
        return LEFT + t / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)

    def py(self, y: float) -> float:
        t = (math.log10(y) if self.ylog else y) - self.y0
        return HEIGHT - BOTTOM - t / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        return [10.0 ** e for e in range(math.ceil(lo - 1e-9), math.floor(hi + 1e-9) + 1)]
    step = 10.0 ** math.floor(math.log10((hi - lo) / 4.0))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= 6:
            step *= mult
            break
    first = math.ceil(lo / step - 1e-9)
    return [round(i * step, 12) for i in range(first, math.floor(hi / step + 1e-9) + 1)]


def _tick_label(v: float) -> str:
    if v != 0 and (abs(v) >= 1e4 or abs(v) < 1e-2):
        return f"{v:.0e}"
    return f"{v:g}"


def _svg(title: str, xlabel: str, ylabel: str, ax: _Axes, series, xticks=None) -> str:
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2:.2f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>']
    x_lo, x_hi = LEFT, WIDTH - RIGHT
    y_lo, y_hi = HEIGHT - BOTTOM, TOP
    out.append(f'<rect x="{x_lo}" y="{y_hi}" width="{x_hi - x_lo}" height="{y_lo - y_hi}" '
               f'fill="none" stroke="black"/>')
    xt = xticks if xticks is not None else _ticks(ax.x0, ax.x1, ax.xlog)
    for v in xt:
        x = ax.px(v)
        if x_lo - 0.01 <= x <= x_hi + 0.01:
            out.append(f'<line x1="{_c(x)}" y1="{y_lo}" x2="{_c(x)}" y2="{y_lo + 5}" stroke="black"/>')
            out.append(f'<text x="{_c(x)}" y="{y_lo + 18}" text-anchor="middle">{_tick_label(v)}</text>')
    for v in _ticks(ax.y0, ax.y1, ax.ylog):
        y = ax.py(v)
        if y_hi - 0.01 <= y <= y_lo + 0.01:
            out.append(f'<line x1="{x_lo - 5}" y1="{_c(y)}" x2="{x_lo}" y2="{_c(y)}" stroke="black"/>')
            out.append(f'<text x="{x_lo - 8}" y="{_c(y + 4)}" text-anchor="end">{_tick_label(v)}</text>')
    out.append(f'<text x="{(x_lo + x_hi) / 2:.2f}" y="{HEIGHT - 18}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{(y_lo + y_hi) / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {(y_lo + y_hi) / 2:.2f})">{escape(ylabel)}</text>')
    for i, (name, xs, ys, markers) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_c(ax.px(x))},{_c(ax.py(y))}" for x, y in zip(xs, ys))
        if len(xs) > 1:
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if markers or len(xs) == 1:
            for x, y in zip(xs, ys):
                out.append(f'<circle cx="{_c(ax.px(x))}" cy="{_c(ax.py(y))}" r="3" fill="{color}"/>')
        ly = TOP + 16 + 18 * i
        out.append(f'<line x1="{x_hi + 12}" y1="{ly}" x2="{x_hi + 32}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{x_hi + 38}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _by_scheme(rows):
    schemes: list[str] = []
    cells: dict = {}
    for r in rows:
        if r["scheme"] not in schemes:
            schemes.append(r["scheme"])
        cells.setdefault((r["scheme"], r["m"]), []).append(r)
    return schemes, cells


def rre_plot(rows) -> str:
    schemes, cells = _by_scheme(rows)
    ms = sorted({m for _, m in cells})
    floor = 1e-16
    series, ys_all = [], []
    for s in schemes:
        xs = [m for m in ms if (s, m) in cells]
        med = [max(median(r["rre"] for r in cells[s, m]), floor) for m in xs]
        avg = [max(float(np.mean([r["rre"] for r in cells[s, m]])), floor) for m in xs]
        series.append((f"{s} median", xs, med, True))
        series.append((f"{s} mean", xs, avg, False))
        ys_all += med + avg
    ax = _Axes((ms[0], ms[-1]), (min(ys_all), max(ys_all)), True, True)
    return _svg("Relative reconstruction error", "measurements m", "rre", ax, series, xticks=ms)


def success_plot(rows) -> str:
    schemes, cells = _by_scheme(rows)
    ms = sorted({m for _, m in cells})
    series = []
    for s in schemes:
        xs = [m for m in ms if (s, m) in cells]
        ys = [sum(r["success"] for r in cells[s, m]) / len(cells[s, m]) for m in xs]
        series.append((s, xs, ys, True))
    ax = _Axes((ms[0], ms[-1]), (0.0, 1.0), True, False)
    return _svg("Recovery success (rre < 3e-3)", "measurements m", "success proportion", ax, series, xticks=ms)


def coherence_plot(alpha) -> str:
    a = np.sort(np.asarray(alpha, dtype=np.float64))[::-1]
    pos = a[a > 0]
    if pos.size == 0:
        raise PlotError("coherence vector is identically zero")
    xs = list(range(1, pos.size + 1))
    ax = _Axes((1, max(pos.size, 2)), (float(pos.min()), float(pos.max())), True, True)
    return _svg("Local coherences, sorted", "rank", "alpha_j", ax, [("alpha", xs, pos.tolist(), pos.size <= 64)])


def emit_plots(rows, outdir, coherence=None) -> dict:
    """Write rre.svg, success.svg and (given coherences) coherence.svg into outdir."""
    rows = list(rows)
    if not rows:
        raise PlotError("no results to plot")
    os.makedirs(outdir, exist_ok=True)
    docs = {"rre_plot": ("rre.svg", rre_plot(rows)), "success_plot": ("success.svg", success_plot(rows))}
    if coherence is not None:
        alpha = getattr(coherence, "alpha", coherence)
        docs["coherence_plot"] = ("coherence.svg", coherence_plot(alpha))
    paths = {}
    for key, (name, text) in docs.items():
        path = os.path.join(outdir, name)
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
        paths[key] = path
    return paths
