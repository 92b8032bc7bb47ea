"""Independent reference implementations used only by the tests.

Nothing here calls into the package's geometry code: rectangles are turned
into corners with plain trigonometry and areas are measured by counting
sample points on a fine grid.
"""
import math

import numpy as np


def corners(x, y, theta, w, h):
    """Rectangle corners; the w side runs along (cos theta, sin theta)."""
    c, s = math.cos(math.radians(theta)), math.sin(math.radians(theta))
    pts = []
    for a, b in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
        dx, dy = a * w / 2, b * h / 2
        pts.append((x + dx * c - dy * s, y + dx * s + dy * c))
    return np.array(pts)


def _row_spans(poly, ys):
    """x-interval [lo, hi] of a convex polygon on each horizontal line y; NaN when missed."""
    lo = np.full(len(ys), np.inf)
    hi = np.full(len(ys), -np.inf)
    for i in range(len(poly)):
        (x0, y0), (x1, y1) = poly[i], poly[(i + 1) % len(poly)]
        if y0 == y1:
            continue
        t = (ys - y0) / (y1 - y0)
        hit = (t >= 0) & (t <= 1)
        xs = x0 + t * (x1 - x0)
        lo = np.where(hit, np.minimum(lo, xs), lo)
        hi = np.where(hit, np.maximum(hi, xs), hi)
    return lo, hi


def _count(lo, hi, x0, dx, n):
    """Grid column centres x0 + (j + 0.5) dx, j < n, lying in [lo, hi]."""
    first = np.clip(np.ceil((lo - x0) / dx - 0.5), 0, n)
    last = np.clip(np.floor((hi - x0) / dx - 0.5), -1, n - 1)
    ok = np.isfinite(lo) & np.isfinite(hi)
    return np.where(ok, np.maximum(last - first + 1, 0), 0)


def raster_jaccard(a, b, n=1000):
    """Jaccard index of two rects (x, y, theta, w, h) on an n x n grid over their joint bounding box.

    Each grid row is intersected with both polygons analytically, so the cost
    is O(n) per pair while the estimate equals full n x n point sampling.
    """
    pa, pb = corners(*a), corners(*b)
    both = np.vstack([pa, pb])
    x0, y0 = both.min(axis=0)
    x1, y1 = both.max(axis=0)
    dx, dy = (x1 - x0) / n, (y1 - y0) / n
    ys = y0 + (np.arange(n) + 0.5) * dy
    la, ha = _row_spans(pa, ys)
    lb, hb = _row_spans(pb, ys)
    ca = _count(la, ha, x0, dx, n)
    cb = _count(lb, hb, x0, dx, n)
    ci = _count(np.maximum(la, lb), np.minimum(ha, hb), x0, dx, n)
    union = ca.sum() + cb.sum() - ci.sum()
    return float(ci.sum() / union) if union else 0.0


def random_rect_pair(rng):
    """Two rects that usually overlap, with varied size, aspect and angle."""
    a = (rng.uniform(20, 80), rng.uniform(20, 80), rng.uniform(0, 180), rng.uniform(4, 50), rng.uniform(4, 50))
    b = (a[0] + rng.normal(0, 8), a[1] + rng.normal(0, 8), rng.uniform(0, 180),
         a[3] * rng.uniform(0.5, 1.5), a[4] * rng.uniform(0.5, 1.5))
    return a, b


def log_softmax_row(z):
    m = max(z)
    s = sum(math.exp(v - m) for v in z)
    return [v - m - math.log(s) for v in z]
