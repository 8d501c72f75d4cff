"""Dependency-free SVG emitters for goal-space boxes and learning curves.

Goal-space rectangles are written in world coordinates inside a single
transform group, so a rect's x/y/width/height equal center - halfwidth and
2 * halfwidth exactly as logged, which keeps the files diffable and easy to
assert against.
"""

from __future__ import annotations

from pathlib import Path

LEVEL_COLORS = ("#1f77b4", "#2ca02c", "#d62728", "#9467bd")


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _rect(x, y, w, h, stroke, dash: bool, label: str) -> str:
    dash_attr = ' stroke-dasharray="0.08 0.08"' if dash else ""
    return (f'  <rect data-label="{label}" x="{_fmt(x)}" y="{_fmt(y)}" '
            f'width="{_fmt(w)}" height="{_fmt(h)}" fill="none" stroke="{stroke}" '
            f'stroke-width="0.03"{dash_attr}/>')


def emit_goalspace_svg(path, snapshots: list[dict], oracle_extent=None) -> None:
    """Draw one rectangle per snapshot.

    Each snapshot dict carries: level (int), label (str), center (sequence),
    halfwidth (sequence), dash (bool). 1-D boxes are drawn with a nominal
    height of 0.2 per level so they stay visible. oracle_extent, when given,
    is a (lo, hi) pair of per-dim sequences drawn as a gray dashed overlay.
    """
    rects = []
    xs, ys = [], []

    def world_rect(center, halfwidth, level):
        if len(center) == 1:
            h = 0.1 + 0.05 * level
            return center[0] - halfwidth[0], -h, 2.0 * halfwidth[0], 2.0 * h
        return (center[0] - halfwidth[0], center[1] - halfwidth[1],
                2.0 * halfwidth[0], 2.0 * halfwidth[1])

    for snap in snapshots:
        x, y, w, h = world_rect(snap["center"], snap["halfwidth"], snap["level"])
        color = LEVEL_COLORS[snap["level"] % len(LEVEL_COLORS)]
        rects.append(_rect(x, y, w, h, color, snap.get("dash", False), snap["label"]))
        xs += [x, x + w]
        ys += [y, y + h]
    if oracle_extent is not None:
        lo, hi = oracle_extent
        if len(lo) == 1:
            x, y, w, h = lo[0], -0.5, hi[0] - lo[0], 1.0
        else:
            x, y, w, h = lo[0], lo[1], hi[0] - lo[0], hi[1] - lo[1]
        rects.append(_rect(x, y, w, h, "#7f7f7f", True, "oracle"))
        xs += [x, x + w]
        ys += [y, y + h]
    pad = 0.3
    x0, x1 = min(xs) - pad, max(xs) + pad
    y0, y1 = min(ys) - pad, max(ys) + pad
    width, height = x1 - x0, y1 - y0
    scale = 400.0 / max(width, height)
    body = "\n".join(rects)
    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'width="{_fmt(width * scale)}" height="{_fmt(height * scale)}" '
        f'viewBox="0 0 {_fmt(width * scale)} {_fmt(height * scale)}">\n'
        f'<g transform="scale({_fmt(scale)},{_fmt(-scale)}) '
        f'translate({_fmt(-x0)},{_fmt(-y1)})">\n'
        f"{body}\n"
        f"</g>\n</svg>\n"
    )
    Path(path).write_text(svg)


def emit_curve_svg(path, xs, ys, xlabel: str, ylabel: str) -> None:
    """Single polyline with axis lines and min/max tick labels."""
    if len(xs) != len(ys) or not xs:
        raise ValueError("xs and ys must be equal-length and nonempty")
    w, h, m = 480.0, 320.0, 50.0
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    xr = (x1 - x0) or 1.0
    yr = (y1 - y0) or 1.0

    def px(x): return m + (x - x0) / xr * (w - 2 * m)
    def py(y): return h - m - (y - y0) / yr * (h - 2 * m)

    pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))
    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:g}" height="{h:g}" '
        f'viewBox="0 0 {w:g} {h:g}">\n'
        f'  <line x1="{m:g}" y1="{h - m:g}" x2="{w - m:g}" y2="{h - m:g}" stroke="black"/>\n'
        f'  <line x1="{m:g}" y1="{m:g}" x2="{m:g}" y2="{h - m:g}" stroke="black"/>\n'
        f'  <polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{pts}"/>\n'
        f'  <text x="{w / 2:g}" y="{h - 12:g}" text-anchor="middle" font-size="13">{xlabel}</text>\n'
        f'  <text x="14" y="{h / 2:g}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 14 {h / 2:g})">{ylabel}</text>\n'
        f'  <text x="{m:g}" y="{h - m + 16:g}" font-size="11">{_fmt(x0)}</text>\n'
        f'  <text x="{w - m:g}" y="{h - m + 16:g}" font-size="11" text-anchor="end">{_fmt(x1)}</text>\n'
        f'  <text x="{m - 4:g}" y="{h - m:g}" font-size="11" text-anchor="end">{_fmt(y0)}</text>\n'
        f'  <text x="{m - 4:g}" y="{m:g}" font-size="11" text-anchor="end">{_fmt(y1)}</text>\n'
        f"</svg>\n"
    )
    Path(path).write_text(svg)
