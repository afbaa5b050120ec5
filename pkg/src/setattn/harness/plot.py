"""Deterministic SVG rendering of training curves."""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from setattn.harness.report import moving_average
from setattn.ppo.trainer import TrainingCurve

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")

WIDTH, HEIGHT = 720, 420
LEFT, RIGHT, TOP, BOTTOM = 60, 170, 30, 45


def _num(x):
    return f"{x:.2f}"


def _points(xs, ys, sx, sy):
    keep = np.isfinite(ys)
    return " ".join(f"{_num(sx(x))},{_num(sy(y))}" for x, y in zip(xs[keep], ys[keep]))


def render_svg(series, reference=None, window=50, title="training curves") -> str:
    """``series`` is a list of ``(label, epochs, returns)``."""
    if not series:
        raise ValueError("need at least one curve to plot")
    ys_all = [ys[np.isfinite(ys)] for _, _, ys in series]
    ys_all = np.concatenate(ys_all + ([np.array([reference])] if reference is not None else []))
    xs_all = np.concatenate([xs for _, xs, _ in series])
    ylo, yhi = (float(ys_all.min()), float(ys_all.max())) if ys_all.size else (0.0, 1.0)
    if yhi - ylo < 1e-9:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    xlo, xhi = (float(xs_all.min()), float(xs_all.max())) if xs_all.size else (0.0, 1.0)
    if xhi - xlo < 1e-9:
        xhi = xlo + 1.0
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + (x - xlo) / (xhi - xlo) * pw

    def sy(y):
        return TOP + (yhi - y) / (yhi - ylo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{LEFT}" y="{TOP - 10}" font-size="14" font-family="sans-serif">{escape(title)}</text>',
        f'<path class="axes" d="M{LEFT},{TOP} V{TOP + ph} H{LEFT + pw}" fill="none" stroke="black"/>',
        f'<text x="{LEFT}" y="{TOP + ph + 18}" font-size="11" font-family="sans-serif">{_num(xlo)}</text>',
        f'<text x="{LEFT + pw}" y="{TOP + ph + 18}" font-size="11" font-family="sans-serif" '
        f'text-anchor="end">{_num(xhi)}</text>',
        f'<text x="{LEFT + pw / 2:.2f}" y="{HEIGHT - 8}" font-size="12" font-family="sans-serif" '
        f'text-anchor="middle">epoch</text>',
        f'<text x="{LEFT - 6}" y="{TOP + 4}" font-size="11" font-family="sans-serif" '
        f'text-anchor="end">{_num(yhi)}</text>',
        f'<text x="{LEFT - 6}" y="{TOP + ph}" font-size="11" font-family="sans-serif" '
        f'text-anchor="end">{_num(ylo)}</text>',
    ]
    legend_y = TOP + 10
    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        out.append(f'<polyline class="curve" fill="none" stroke="{color}" stroke-width="1" '
                   f'stroke-opacity="0.6" points="{_points(xs, ys, sx, sy)}"/>')
        if len(ys) >= window:
            ma = moving_average(ys, window)
            out.append(f'<polyline class="moving-average" fill="none" stroke="{color}" stroke-width="2" '
                       f'points="{_points(xs, ma, sx, sy)}"/>')
        lx = LEFT + pw + 12
        out.append(f'<rect class="legend" x="{lx}" y="{legend_y - 8}" width="12" height="8" fill="{color}"/>')
        out.append(f'<text x="{lx + 18}" y="{legend_y}" font-size="11" font-family="sans-serif">'
                   f'{escape(label)}</text>')
        legend_y += 16
    if reference is not None:
        y = _num(sy(reference))
        out.append(f'<line class="reference" x1="{LEFT}" y1="{y}" x2="{LEFT + pw}" y2="{y}" '
                   f'stroke="black" stroke-dasharray="6,4"/>')
        lx = LEFT + pw + 12
        out.append(f'<text x="{lx}" y="{legend_y + 4}" font-size="11" font-family="sans-serif">'
                   f'greedy {_num(reference)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(curve_paths, out_path=None, reference=None, window=50, title="training curves",
              labels=None) -> str:
    paths = [Path(p) for p in curve_paths]
    if not paths:
        raise ValueError("need at least one curve file")
    labels = labels or [p.stem for p in paths]
    series = []
    for p, label in zip(paths, labels):
        curve = TrainingCurve.from_csv(p)
        epochs = np.array([r.epoch for r in curve.records], dtype=np.float64)
        series.append((label, epochs, curve.returns))
    svg = render_svg(series, reference, window, title)
    if out_path is not None:
        Path(out_path).write_text(svg)
    return svg
