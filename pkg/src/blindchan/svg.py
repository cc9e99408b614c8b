"""Minimal self-contained SVG line charts (no plotting dependency)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

WIDTH, HEIGHT = 720, 480
ML, MR, MT, MB = 70, 150, 44, 56
PLOT_W, PLOT_H = WIDTH - ML - MR, HEIGHT - MT - MB

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"]


@dataclass
class Series:
    label: str
    x: list[float]
    y: list[float]
    dashed: bool = False
    marker: int = 0  # 0 circle, 1 diamond, 2 square
    color_index: int = 0


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _marker_svg(kind: int, cx: float, cy: float, color: str) -> str:
    r = 4.0
    if kind % 3 == 0:
        return f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{r}" fill="none" stroke="{color}"/>'
    if kind % 3 == 1:
        pts = f"{_fmt(cx)},{_fmt(cy - r)} {_fmt(cx + r)},{_fmt(cy)} {_fmt(cx)},{_fmt(cy + r)} {_fmt(cx - r)},{_fmt(cy)}"
        return f'<polygon points="{pts}" fill="none" stroke="{color}"/>'
    return (f'<rect x="{_fmt(cx - r)}" y="{_fmt(cy - r)}" width="{2 * r}" height="{2 * r}" '
            f'fill="none" stroke="{color}"/>')


def line_chart(series: list[Series], title: str, xlabel: str, ylabel: str,
               path, ylog: bool = True) -> None:
    xs = [v for s in series for v in s.x]
    ys = [v for s in series for v in s.y if math.isfinite(v) and (not ylog or v > 0)]
    if not xs or not ys:
        xs, ys = [0.0, 1.0], [0.1, 1.0]
    x0, x1 = min(xs), max(xs)
    if x1 == x0:
        x1 = x0 + 1.0
    if ylog:
        y0 = math.floor(math.log10(min(ys)))
        y1 = math.ceil(math.log10(max(ys)))
        if y1 == y0:
            y1 = y0 + 1
    else:
        y0, y1 = min(ys), max(ys)
        if y1 == y0:
            y1 = y0 + 1.0

    def px(x: float) -> float:
        return ML + (x - x0) / (x1 - x0) * PLOT_W

    def py(y: float) -> float:
        t = (math.log10(y) - y0) / (y1 - y0) if ylog else (y - y0) / (y1 - y0)
        return MT + (1.0 - t) * PLOT_H

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="15">{title}</text>',
        f'<rect x="{ML}" y="{MT}" width="{PLOT_W}" height="{PLOT_H}" fill="none" stroke="black"/>',
        f'<text x="{ML + PLOT_W / 2}" y="{HEIGHT - 14}" text-anchor="middle">{xlabel}</text>',
        f'<text x="18" y="{MT + PLOT_H / 2}" text-anchor="middle" '
        f'transform="rotate(-90 18 {MT + PLOT_H / 2})">{ylabel}</text>',
    ]

    xticks = sorted(set(xs))
    if len(xticks) > 12:
        xticks = xticks[:: max(1, len(xticks) // 12)]
    for xv in xticks:
        x = px(xv)
        out.append(f'<line x1="{_fmt(x)}" y1="{MT + PLOT_H}" x2="{_fmt(x)}" y2="{MT + PLOT_H + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{MT + PLOT_H + 18}" text-anchor="middle">{_fmt(xv)}</text>')
    if ylog:
        for e in range(int(y0), int(y1) + 1):
            y = py(10.0**e)
            out.append(f'<line x1="{ML - 5}" y1="{_fmt(y)}" x2="{ML}" y2="{_fmt(y)}" stroke="black"/>')
            out.append(f'<text x="{ML - 8}" y="{_fmt(y + 4)}" text-anchor="end">1e{e}</text>')
            if e > y0:
                out.append(f'<line x1="{ML}" y1="{_fmt(y)}" x2="{ML + PLOT_W}" y2="{_fmt(y)}" '
                           f'stroke="#dddddd"/>')
    else:
        for i in range(5):
            yv = y0 + (y1 - y0) * i / 4
            y = py(yv)
            out.append(f'<line x1="{ML - 5}" y1="{_fmt(y)}" x2="{ML}" y2="{_fmt(y)}" stroke="black"/>')
            out.append(f'<text x="{ML - 8}" y="{_fmt(y + 4)}" text-anchor="end">{_fmt(yv)}</text>')

    legend_y = MT + 10
    for s in series:
        color = _COLORS[s.color_index % len(_COLORS)]
        dash = ' stroke-dasharray="6 4"' if s.dashed else ""
        pts = [(px(xv), py(yv)) for xv, yv in zip(s.x, s.y)
               if math.isfinite(yv) and (not ylog or yv > 0)]
        if pts:
            poly = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)
            out.append(f'<polyline points="{poly}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
            out.extend(_marker_svg(s.marker, a, b, color) for a, b in pts)
        lx = ML + PLOT_W + 12
        out.append(f'<line x1="{lx}" y1="{legend_y}" x2="{lx + 26}" y2="{legend_y}" '
                   f'stroke="{color}" stroke-width="1.5"{dash}/>')
        out.append(_marker_svg(s.marker, lx + 13, legend_y, color))
        out.append(f'<text x="{lx + 32}" y="{legend_y + 4}">{s.label}</text>')
        legend_y += 18

    out.append("</svg>")
    Path(path).write_text("\n".join(out))
