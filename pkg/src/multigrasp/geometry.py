"""Oriented grasp rectangles and the grasp success criterion.

Coordinates are image pixels: x to the right, y down. Angles are degrees
in [0, 180) measured from +x towards +y, i.e. the plate edge of length ``w``
points along (cos theta, sin theta). Rectangles are stored as
``(x, y, theta, w, h)``; ``w`` is the plate length and ``h`` the gripper
opening.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidRect, NonRectangular

DEFAULT_JACCARD = 0.25
DEFAULT_ANGLE = 30.0


@dataclass(frozen=True)
class GraspRect:
    x: float
    y: float
    theta: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.x, self.y, self.theta, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidRect(f"non-finite rectangle {vals}")
        if self.w <= 0 or self.h <= 0:
            raise InvalidRect(f"rectangle dimensions must be positive, got w={self.w} h={self.h}")
        object.__setattr__(self, "theta", float(self.theta) % 180.0)
        if self.theta >= 180.0:  # -tiny % 180 rounds up to 180.0
            object.__setattr__(self, "theta", 0.0)

    def as_tuple(self):
        return (self.x, self.y, self.theta, self.w, self.h)

    @property
    def area(self):
        return self.w * self.h


@dataclass(frozen=True)
class AxisAlignedBox:
    cx: float
    cy: float
    bw: float
    bh: float

    def __post_init__(self):
        if not (self.bw > 0 and self.bh > 0):
            raise InvalidRect(f"box dimensions must be positive, got {self.bw}x{self.bh}")

    def corners(self):
        """(x1, y1, x2, y2)."""
        return (self.cx - self.bw / 2, self.cy - self.bh / 2,
                self.cx + self.bw / 2, self.cy + self.bh / 2)

    @classmethod
    def from_corners(cls, x1, y1, x2, y2):
        return cls((x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1)


def rects_to_array(rects):
    if len(rects) == 0:
        return np.zeros((0, 5))
    return np.array([r.as_tuple() for r in rects], dtype=np.float64)


def boxes_to_array(boxes):
    """Boxes as an (N, 4) array of (cx, cy, bw, bh)."""
    if len(boxes) == 0:
        return np.zeros((0, 4))
    return np.array([(b.cx, b.cy, b.bw, b.bh) for b in boxes], dtype=np.float64)


def center_to_corners(arr):
    arr = np.asarray(arr, dtype=np.float64)
    half = arr[..., 2:4] / 2
    return np.concatenate([arr[..., 0:2] - half, arr[..., 0:2] + half], axis=-1)


def corners_to_center(arr):
    arr = np.asarray(arr, dtype=np.float64)
    return np.concatenate([(arr[..., 0:2] + arr[..., 2:4]) / 2, arr[..., 2:4] - arr[..., 0:2]], axis=-1)


def rect_to_polygon(r):
    """Corners of ``r`` as a (4, 2) array, positively oriented.

    v1->v2 runs along the plate edge (length w), v2->v3 across the opening.
    """
    t = math.radians(r.theta)
    u = np.array([math.cos(t), math.sin(t)])
    n = np.array([-u[1], u[0]])
    c = np.array([r.x, r.y])
    hw, hh = r.w / 2, r.h / 2
    return np.array([c - hw * u - hh * n, c + hw * u - hh * n,
                     c + hw * u + hh * n, c - hw * u + hh * n])


def polygon_to_rect(poly, rtol=1e-3):
    p = np.asarray(poly, dtype=np.float64)
    if p.shape != (4, 2) or not np.all(np.isfinite(p)):
        raise NonRectangular(f"expected 4 finite vertices, got shape {p.shape}")
    e = np.roll(p, -1, axis=0) - p
    lens = np.hypot(e[:, 0], e[:, 1])
    scale = max(lens.max(), 1e-300)
    if lens.min() <= 1e-9 * scale:
        raise NonRectangular("degenerate polygon (repeated vertex)")
    if abs(lens[0] - lens[2]) > rtol * scale or abs(lens[1] - lens[3]) > rtol * scale:
        raise NonRectangular(f"opposite edges differ: {lens.tolist()}")
    c = p.mean(axis=0)
    theta = math.degrees(math.atan2(e[0, 1], e[0, 0])) % 180.0
    return GraspRect(float(c[0]), float(c[1]), theta, float(lens[0]), float(lens[1]))


def reset_to_axis_aligned(r):
    """Drop the orientation, keeping centre and dimensions."""
    return AxisAlignedBox(r.x, r.y, r.w, r.h)


def angle_difference(a, b):
    d = abs(a - b) % 180.0
    return min(d, 180.0 - d)


def polygon_area(poly):
    p = np.asarray(poly, dtype=np.float64)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def jaccard_batch(a, b):
    """Element-wise Jaccard index of two (N, 5) rect arrays.

    Operands are put in a canonical order per pair before clipping so the
    result is exactly symmetric.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    a, b = np.broadcast_arrays(a, b)
    swap = np.zeros(len(a), dtype=bool)
    undecided = np.ones(len(a), dtype=bool)
    for k in range(5):
        gt = a[:, k] > b[:, k]
        lt = a[:, k] < b[:, k]
        swap |= undecided & gt
        undecided &= ~(gt | lt)
    first = np.where(swap[:, None], b, a)
    second = np.where(swap[:, None], a, b)
    return kernels.rect_jaccard_batch(np.ascontiguousarray(first), np.ascontiguousarray(second))


def jaccard_index(a, b):
    return float(jaccard_batch(rects_to_array([a]), rects_to_array([b]))[0])


def is_correct(pred, gt, j_thresh=DEFAULT_JACCARD, a_thresh=DEFAULT_ANGLE):
    """Angle within ``a_thresh`` (inclusive) and Jaccard above ``j_thresh`` (strict)."""
    if angle_difference(pred.theta, gt.theta) > a_thresh:
        return False
    return jaccard_index(pred, gt) > j_thresh


def box_iou_matrix(a, b):
    """Pairwise IoU of axis-aligned boxes given as (N, 4) / (M, 4) corner arrays."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        iou = np.where(union > 0, inter / union, 0.0)
    return iou


def nms(boxes, scores, iou_thresh):
    """Greedy axis-aligned NMS; returns kept indices by descending score."""
    boxes = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 4)
    scores = np.asarray(scores, dtype=np.float64)
    if len(boxes) == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.argsort(-scores, kind="stable").astype(np.int64)
    return kernels.nms(boxes, order, float(iou_thresh))
