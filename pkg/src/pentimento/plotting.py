"""Static SVG line charts of Δps against hour."""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .experiment import BurnVector, DelaySeries

BURN_COLOURS = {0: "#00b7c7", 1: "#c7009b"}  # cyan, magenta
UNKNOWN_COLOUR = "#555555"

WIDTH, HEIGHT = 720, 420
MARGIN = dict(left=64, right=24, top=36, bottom=48)


def _ticks(lo: float, hi: float, n: int = 6) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=raw)
    return np.arange(np.ceil(lo / step) * step, hi + step * 1e-9, step)


def render_svg(
    series: DelaySeries,
    burn: BurnVector | None = None,
    title: str = "",
    shade_hours: Sequence[tuple[float, float]] = (),
) -> str:
    """One polyline per route, coloured by its burn bit when known."""
    if len(series) == 0 or not series.route_ids:
        raise ValueError("nothing to plot: series is empty")
    x0, x1 = float(series.hours.min()), float(series.hours.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    y0, y1 = float(series.delta_ps.min()), float(series.delta_ps.max())
    pad = 0.05 * (y1 - y0) if y1 > y0 else 0.5
    y0, y1 = y0 - pad, y1 + pad

    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    sx = lambda h: MARGIN["left"] + (h - x0) / (x1 - x0) * pw
    sy = lambda v: MARGIN["top"] + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    for a, b in shade_hours:
        a, b = max(a, x0), min(b, x1)
        if b > a:
            out.append(
                f'<rect x="{sx(a):.2f}" y="{MARGIN["top"]}" width="{sx(b) - sx(a):.2f}" '
                f'height="{ph}" fill="#eeeeee"/>'
            )
    for t in _ticks(y0, y1):
        y = sy(t)
        out.append(f'<line x1="{MARGIN["left"]}" x2="{WIDTH - MARGIN["right"]}" y1="{y:.2f}" y2="{y:.2f}" stroke="#dddddd"/>')
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{y + 4:.2f}" text-anchor="end">{t:g}</text>')
    for t in _ticks(x0, x1):
        x = sx(t)
        out.append(f'<text x="{x:.2f}" y="{HEIGHT - MARGIN["bottom"] + 16}" text-anchor="middle">{t:g}</text>')
    out.append(
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
        'fill="none" stroke="black"/>'
    )
    for i, rid in enumerate(series.route_ids):
        colour = BURN_COLOURS[burn.bits[i]] if burn is not None else UNKNOWN_COLOUR
        pts = " ".join(f"{sx(h):.2f},{sy(v):.2f}" for h, v in zip(series.hours, series.delta_ps[i]))
        out.append(
            f'<polyline data-route="{escape(rid)}" points="{pts}" fill="none" '
            f'stroke="{colour}" stroke-width="1" stroke-opacity="0.8"/>'
        )
    out.append(
        f'<text x="{MARGIN["left"] + pw / 2}" y="{HEIGHT - 10}" text-anchor="middle">hour</text>'
    )
    out.append(
        f'<text x="14" y="{MARGIN["top"] + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 14 {MARGIN["top"] + ph / 2})">Δps</text>'
    )
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>')
    if burn is not None:
        lx = WIDTH - MARGIN["right"] - 110
        for k, (bit, label) in enumerate(((0, "burn 0"), (1, "burn 1"))):
            y = MARGIN["top"] + 14 + 14 * k
            out.append(f'<line x1="{lx}" x2="{lx + 18}" y1="{y - 4}" y2="{y - 4}" stroke="{BURN_COLOURS[bit]}" stroke-width="2"/>')
            out.append(f'<text x="{lx + 24}" y="{y}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
