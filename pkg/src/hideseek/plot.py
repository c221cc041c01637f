"""Static SVG line charts of training metrics.

The chart follows the usual reward-curve style: the raw series drawn faintly
with its exponential moving average on top. Polylines hold points in data
coordinates; a group transform maps them into the plot area, so the numbers
in the file are exactly the plotted values.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

from .harness.metrics import read_csv, smooth

WIDTH, HEIGHT = 720, 420
MARGIN = (70, 20, 30, 50)  # left, right, top, bottom
PALETTE = ("#e8590c", "#c2255c", "#1971c2", "#2f9e44")


def nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / max(1, count)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-9 * step:
        out.append(round(v, 12))
        v += step
    return out


def _label(v: float) -> str:
    if v != 0 and (abs(v) >= 1e5 or abs(v) < 1e-3):
        return f"{v:.2g}"
    return f"{v:g}"


def _points(xs, ys) -> str:
    return " ".join(f"{x!r},{y!r}" for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y))


def series_from_metrics(rows: list[dict], column: str, x: str = "global_step", team: str | None = None):
    """``{label: (xs, ys)}``; one series per team when the file has a team column."""
    if rows and column not in rows[0]:
        raise KeyError(f"column {column!r} not in metrics file; available: {', '.join(rows[0])}")
    if rows and x not in rows[0]:
        raise KeyError(f"x column {x!r} not in metrics file")
    teams = [team] if team else sorted({r["team"] for r in rows if r.get("team")}) or [None]
    out = {}
    for t in teams:
        sel = [r for r in rows if t is None or r.get("team") == t]
        xs = [float(r[x]) for r in sel]
        ys = [float(r[column]) if r[column] != "" else math.nan for r in sel]
        out[t or column] = (xs, ys)
    return out


def render_svg(series: dict, factor: float, title: str = "", ylabel: str = "", xlabel: str = "global_step") -> str:
    """SVG 1.1 document; each series gets a faint raw polyline and its smoothed
    polyline (ids ``raw-<label>`` and ``smoothed-<label>``)."""
    sm = {k: smooth(ys, factor) for k, (_, ys) in series.items()}
    allx = [x for xs, _ in series.values() for x in xs if math.isfinite(x)]
    ally = [y for _, ys in series.values() for y in ys if math.isfinite(y)]
    x0, x1 = (min(allx), max(allx)) if allx else (0.0, 1.0)
    y0, y1 = (min(ally), max(ally)) if ally else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    left, right, top, bottom = MARGIN
    pw, ph = WIDTH - left - right, HEIGHT - top - bottom
    sx, sy = pw / (x1 - x0), ph / (y1 - y0)
    transform = f"matrix({sx!r},0,0,{-sy!r},{left - x0 * sx!r},{top + y1 * sy!r})"
    px = lambda v: left + (v - x0) * sx  # noqa: E731
    py = lambda v: top + (y1 - v) * sy  # noqa: E731

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{left}" y="{top - 10}" font-size="13">{escape(title)}</text>')
    out.append(f'<g id="grid" stroke="#dee2e6" stroke-width="1">')
    xt, yt = nice_ticks(x0, x1), nice_ticks(y0, y1)
    for v in xt:
        out.append(f'<line x1="{px(v):.2f}" y1="{top}" x2="{px(v):.2f}" y2="{top + ph}"/>')
    for v in yt:
        out.append(f'<line x1="{left}" y1="{py(v):.2f}" x2="{left + pw}" y2="{py(v):.2f}"/>')
    out.append("</g>")
    out.append('<g id="labels" fill="#495057">')
    for v in xt:
        out.append(f'<text x="{px(v):.2f}" y="{top + ph + 16}" text-anchor="middle">{_label(v)}</text>')
    for v in yt:
        out.append(f'<text x="{left - 6}" y="{py(v) + 4:.2f}" text-anchor="end">{_label(v)}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 14 {top + ph / 2:.1f})">{escape(ylabel)} (smoothed {factor:g})</text>')
    out.append("</g>")
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#868e96"/>')
    out.append(f'<g id="data" transform="{transform}" fill="none">')
    for i, (label, (xs, ys)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        lid = escape(str(label))
        out.append(f'<polyline id="raw-{lid}" stroke="{color}" stroke-opacity="0.25" stroke-width="1" '
                   f'vector-effect="non-scaling-stroke" points="{_points(xs, ys)}"/>')
        out.append(f'<polyline id="smoothed-{lid}" stroke="{color}" stroke-width="2" '
                   f'vector-effect="non-scaling-stroke" points="{_points(xs, sm[label])}"/>')
    out.append("</g>")
    if len(series) > 1:
        out.append('<g id="legend">')
        for i, label in enumerate(series):
            y = top + 14 + 16 * i
            color = PALETTE[i % len(PALETTE)]
            out.append(f'<line x1="{left + 10}" y1="{y - 4}" x2="{left + 30}" y2="{y - 4}" stroke="{color}" '
                       f'stroke-width="2"/>')
            out.append(f'<text x="{left + 36}" y="{y}">{escape(str(label))}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_metrics(path: str, column: str, factor: float, out_path: str, team: str | None = None,
                 x: str = "global_step") -> dict:
    if not 0.0 <= factor < 1.0:
        raise ValueError("smoothing factor must lie in [0, 1)")
    rows = read_csv(path)
    series = series_from_metrics(rows, column, x, team)
    svg = render_svg(series, factor, title=column, ylabel=column, xlabel=x)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(svg)
    return series


def read_polylines(svg_text: str) -> dict:
    """``{id: [(x, y), ...]}`` for every polyline in an SVG document."""
    import xml.etree.ElementTree as ET

    root = ET.fromstring(svg_text)
    out = {}
    for el in root.iter("{http://www.w3.org/2000/svg}polyline"):
        pts = []
        for pair in el.get("points", "").split():
            a, b = pair.split(",")
            pts.append((float(a), float(b)))
        out[el.get("id")] = pts
    return out
