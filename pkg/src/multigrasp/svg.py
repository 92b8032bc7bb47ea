"""SVG overlays of grasp rectangles.

Each rectangle is drawn as its four edges. The two plate edges (v1-v2 and
v3-v4) are thick solid strokes; the two opening edges are thin dashed
strokes. Ground truth and predictions use different colours.
"""
from xml.sax.saxutils import quoteattr

import numpy as np

from .geometry import rect_to_polygon

GT_COLOR = "#00c000"
PRED_COLOR = "#ff0000"
PLATE_STYLE = 'stroke-width="3"'
OPENING_STYLE = 'stroke-width="1" stroke-dasharray="4 2"'


def _num(v):
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _rect_lines(rect, color, kind):
    p = rect_to_polygon(rect)
    out = []
    for i, style, edge in ((0, PLATE_STYLE, "plate"), (1, OPENING_STYLE, "opening"),
                           (2, PLATE_STYLE, "plate"), (3, OPENING_STYLE, "opening")):
        a, b = p[i], p[(i + 1) % 4]
        out.append(f'  <line class="{kind} {edge}" x1="{_num(a[0])}" y1="{_num(a[1])}" '
                   f'x2="{_num(b[0])}" y2="{_num(b[1])}" stroke="{color}" {style}/>')
    return out


def _size(image):
    if isinstance(image, np.ndarray):
        return image.shape[1], image.shape[0]
    w, h = image
    return int(w), int(h)


def export_overlay(image, detections=(), gts=(), href=None):
    """SVG document drawing ``gts`` and ``detections`` over an image frame.

    ``image`` is an (H, W[, C]) array or a (width, height) pair. ``href``
    optionally references the raster to draw underneath.
    """
    w, h = _size(image)
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" '
             f'width="{w}" height="{h}" viewBox="0 0 {w} {h}">']
    if href is not None:
        lines.append(f'  <image x="0" y="0" width="{w}" height="{h}" xlink:href={quoteattr(str(href))}/>')
    else:
        lines.append(f'  <rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff" stroke="#000000"/>')
    for g in gts:
        lines.extend(_rect_lines(g, GT_COLOR, "gt"))
    for d in detections:
        lines.extend(_rect_lines(getattr(d, "rect", d), PRED_COLOR, "pred"))
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
