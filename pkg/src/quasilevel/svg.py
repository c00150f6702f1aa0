"""Static SVG figures of traced level lines."""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

from .contour import fmt


@dataclass(frozen=True)
class SvgStyle:
    size_px: int = 800
    closed_stroke: str = "#1f4e79"
    open_stroke: str = "#c0392b"
    open_dash: str = "6,3"
    stroke_width: float = 1.0
    axis_stroke: str = "#888888"
    sector_stroke: str = "#2e8b57"
    show_axes: bool = True


def _path(points, tx, closed):
    parts = []
    for k, (x, y) in enumerate(points):
        X, Y = tx(x, y)
        parts.append(("M" if k == 0 else "L") + fmt(X) + " " + fmt(Y))
    if closed:
        parts.append("Z")
    return " ".join(parts)


def render_svg(contours, window=None, style: SvgStyle = SvgStyle(), sectors=None,
               title: str | None = None) -> str:
    """
    SVG document with one ``path`` per contour.

    Parameters
    ----------
    contours : ContourSet or iterable of Contour
        When a ContourSet is given its window sets the viewport.
    window : Window, optional
        Viewport for a bare list of contours; defaults to their bounding box.
    sectors : DihedralDescriptor, optional
        Draws the ``2n`` sector rays from the symmetry center.

    Open contours are dashed in a separate colour.  Numbers are written with
    12 significant digits so the output is reproducible byte for byte.
    """
    win = window if window is not None else getattr(contours, "window", None)
    items = list(contours)
    if win is not None:
        x0, x1, y0, y1 = win.bounds
    elif items:
        xs = [float(v) for c in items for v in c.points[:, 0]]
        ys = [float(v) for c in items for v in c.points[:, 1]]
        x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
        if x1 == x0:
            x0, x1 = x0 - 1, x1 + 1
        if y1 == y0:
            y0, y1 = y0 - 1, y1 + 1
    else:
        x0, x1, y0, y1 = -1.0, 1.0, -1.0, 1.0
    span = max(x1 - x0, y1 - y0)
    k = style.size_px / span
    W = (x1 - x0) * k
    H = (y1 - y0) * k

    def tx(x, y):
        return (x - x0) * k, (y1 - y) * k

    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" width="{fmt(W)}" height="{fmt(H)}" '
           f'viewBox="0 0 {fmt(W)} {fmt(H)}">']
    if title:
        out.append(f"<title>{escape(title)}</title>")
    out.append(f'<rect x="0" y="0" width="{fmt(W)}" height="{fmt(H)}" fill="white" stroke="black"/>')
    if style.show_axes:
        g = ['<g id="axes" stroke="{}" stroke-width="0.5">'.format(style.axis_stroke)]
        if x0 <= 0 <= x1:
            X, _ = tx(0.0, 0.0)
            g.append(f'<line x1="{fmt(X)}" y1="0" x2="{fmt(X)}" y2="{fmt(H)}"/>')
        if y0 <= 0 <= y1:
            _, Y = tx(0.0, 0.0)
            g.append(f'<line x1="0" y1="{fmt(Y)}" x2="{fmt(W)}" y2="{fmt(Y)}"/>')
        g.append("</g>")
        out.extend(g)
    if sectors is not None:
        cx, cy = sectors.center
        reach = 2.0 * span
        out.append(f'<g id="sectors" stroke="{style.sector_stroke}" stroke-width="0.75">')
        for a in sectors.ray_angles():
            X0, Y0 = tx(cx, cy)
            X1, Y1 = tx(cx + reach * math.cos(a), cy + reach * math.sin(a))
            out.append(f'<line x1="{fmt(X0)}" y1="{fmt(Y0)}" x2="{fmt(X1)}" y2="{fmt(Y1)}"/>')
        out.append("</g>")
    out.append(f'<g id="contours" fill="none" stroke-width="{fmt(style.stroke_width)}">')
    for i, c in enumerate(items):
        if c.closed:
            attrs = f'class="closed" stroke="{style.closed_stroke}"'
        else:
            attrs = f'class="open" stroke="{style.open_stroke}" stroke-dasharray="{style.open_dash}"'
        out.append(f'<path id="c{i}" {attrs} d="{_path(c.points[:-1] if c.closed else c.points, tx, c.closed)}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
