"""Targets for both network stages.

Boxes are handled as (N, 4) float arrays in centre form ``(cx, cy, bw, bh)``
unless a name says ``corners``. The orientation of a grasp becomes a class:
``1..R`` for R equal bins over [0, 180) and ``0`` for "not a grasp".
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EmptyGroundTruth, NullClassHasNoAngle
from .geometry import (AxisAlignedBox, box_iou_matrix, center_to_corners,
                       corners_to_center, reset_to_axis_aligned)

# exp() clamp for size deltas, as in the usual two-stage detectors
DELTA_CLAMP = math.log(1000.0 / 16)

POSITIVE, NEGATIVE, IGNORE = 1, 0, -1


@dataclass(frozen=True)
class AngleCodec:
    R: int = 19

    def __post_init__(self):
        if self.R < 1:
            raise ConfigError(f"need at least one orientation class, got R={self.R}")

    @property
    def n_classes(self):
        return self.R + 1

    @property
    def bin_width(self):
        return 180.0 / self.R

    @property
    def edges(self):
        """Lower edge of each bin; bin i+1 is [edges[i], edges[i+1])."""
        return np.arange(self.R) * (180.0 / self.R)

    def quantize(self, theta):
        t = np.asarray(theta, dtype=np.float64) % 180.0
        cls = np.searchsorted(self.edges, t, side="right")
        cls = np.clip(cls, 1, self.R)
        return int(cls) if cls.ndim == 0 else cls.astype(np.int64)

    def angle(self, label):
        lab = np.asarray(label)
        if np.any(lab == 0):
            raise NullClassHasNoAngle("class 0 is the non-grasp class")
        if np.any((lab < 0) | (lab > self.R)):
            raise ValueError(f"class outside 1..{self.R}: {label}")
        a = (lab - 0.5) * (180.0 / self.R)
        return float(a) if a.ndim == 0 else a


def quantize_angle(theta, codec=AngleCodec()):
    return codec.quantize(theta)


def class_to_angle(label, codec=AngleCodec()):
    return codec.angle(label)


@dataclass(frozen=True)
class AnchorConfig:
    stride: int = 16
    scales: tuple = (1.0, 2.0, 4.0)
    ratios: tuple = (0.5, 1.0, 2.0)

    def __post_init__(self):
        if self.stride <= 0 or not self.scales or not self.ratios:
            raise ConfigError("anchor stride must be positive and scales/ratios non-empty")
        if any(v <= 0 for v in (*self.scales, *self.ratios)):
            raise ConfigError("anchor scales and ratios must be positive")

    @property
    def k(self):
        return len(self.scales) * len(self.ratios)


def base_shapes(cfg):
    """(k, 2) array of anchor (bw, bh), scale-major."""
    out = []
    for s in cfg.scales:
        side = s * cfg.stride
        for r in cfg.ratios:
            out.append((side / math.sqrt(r), side * math.sqrt(r)))
    return np.array(out)


def generate_anchors(feat_w, feat_h, cfg=AnchorConfig()):
    """Anchors for every feature cell, ordered (row, column, shape)."""
    shapes = base_shapes(cfg)
    ys = (np.arange(feat_h) + 0.5) * cfg.stride
    xs = (np.arange(feat_w) + 0.5) * cfg.stride
    cy, cx = np.meshgrid(ys, xs, indexing="ij")
    centers = np.stack([cx, cy], axis=-1)[:, :, None, :]
    centers = np.broadcast_to(centers, (feat_h, feat_w, len(shapes), 2))
    dims = np.broadcast_to(shapes, (feat_h, feat_w, len(shapes), 2))
    return np.concatenate([centers, dims], axis=-1).reshape(-1, 4).copy()


def clip_boxes(boxes, width, height):
    """Clip centre-form boxes to [0, width] x [0, height]."""
    c = center_to_corners(boxes)
    c[:, [0, 2]] = np.clip(c[:, [0, 2]], 0, width)
    c[:, [1, 3]] = np.clip(c[:, [1, 3]], 0, height)
    return corners_to_center(c)


def encode(anchors, gts):
    a = np.asarray(anchors, dtype=np.float64).reshape(-1, 4)
    g = np.asarray(gts, dtype=np.float64).reshape(-1, 4)
    return np.stack([
        (g[:, 0] - a[:, 0]) / a[:, 2],
        (g[:, 1] - a[:, 1]) / a[:, 3],
        np.log(g[:, 2] / a[:, 2]),
        np.log(g[:, 3] / a[:, 3]),
    ], axis=1)


def decode(anchors, deltas):
    a = np.asarray(anchors, dtype=np.float64).reshape(-1, 4)
    t = np.asarray(deltas, dtype=np.float64).reshape(-1, 4)
    return np.stack([
        a[:, 0] + t[:, 0] * a[:, 2],
        a[:, 1] + t[:, 1] * a[:, 3],
        a[:, 2] * np.exp(np.minimum(t[:, 2], DELTA_CLAMP)),
        a[:, 3] * np.exp(np.minimum(t[:, 3], DELTA_CLAMP)),
    ], axis=1)


def _as_row(box):
    if isinstance(box, AxisAlignedBox):
        return np.array([[box.cx, box.cy, box.bw, box.bh]])
    return np.asarray(box, dtype=np.float64).reshape(1, 4)


def encode_box(anchor, gt):
    return encode(_as_row(anchor), _as_row(gt))[0]


def decode_box(anchor, t):
    cx, cy, bw, bh = decode(_as_row(anchor), t)[0]
    return AxisAlignedBox(float(cx), float(cy), float(bw), float(bh))


def reset_boxes(rects):
    """Axis-aligned reset boxes of grasp rects as an (N, 4) centre array."""
    if not rects:
        return np.zeros((0, 4))
    return np.array([[b.cx, b.cy, b.bw, b.bh] for b in map(reset_to_axis_aligned, rects)])


@dataclass
class GpnTargets:
    labels: np.ndarray  # (N,) POSITIVE / NEGATIVE / IGNORE
    deltas: np.ndarray  # (N, 4); meaningful where labels == POSITIVE
    matched: np.ndarray = field(default=None)  # (N,) gt index, -1 if none

    @property
    def positives(self):
        return np.flatnonzero(self.labels == POSITIVE)

    @property
    def negatives(self):
        return np.flatnonzero(self.labels == NEGATIVE)


def label_anchors(anchors, gt_boxes, pos_iou=0.7, neg_iou=0.3):
    """Label anchors against reset ground-truth boxes.

    Positive at IoU >= ``pos_iou`` with any box, or when the anchor attains a
    box's best IoU (ties included). Negative below ``neg_iou``. Everything
    else is ignored.
    """
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 4)
    gt_boxes = np.asarray(gt_boxes, dtype=np.float64).reshape(-1, 4)
    if len(gt_boxes) == 0:
        raise EmptyGroundTruth("anchor labelling needs at least one ground-truth box")
    iou = box_iou_matrix(center_to_corners(anchors), center_to_corners(gt_boxes))
    best_gt = iou.argmax(axis=1)
    best = iou[np.arange(len(anchors)), best_gt]
    labels = np.full(len(anchors), IGNORE, dtype=np.int64)
    labels[best < neg_iou] = NEGATIVE
    per_gt = iou.max(axis=0)
    forced_a, forced_g = np.nonzero((iou == per_gt[None, :]) & (per_gt[None, :] > 0))
    matched = best_gt.copy()
    labels[best >= pos_iou] = POSITIVE
    # keep the box that forced a max-IoU positive when the anchor is not positive on its own
    weak = best[forced_a] < pos_iou
    matched[forced_a[weak]] = forced_g[weak]
    labels[forced_a] = POSITIVE
    deltas = np.zeros((len(anchors), 4))
    pos = labels == POSITIVE
    deltas[pos] = encode(anchors[pos], gt_boxes[matched[pos]])
    matched = np.where(labels == NEGATIVE, -1, matched)
    return GpnTargets(labels, deltas, matched)


@dataclass
class HeadTargets:
    labels: np.ndarray  # (N,) class 0..R
    deltas: np.ndarray  # (N, 4); meaningful where labels != 0
    matched: np.ndarray = field(default=None)

    @property
    def foreground(self):
        return np.flatnonzero(self.labels != 0)


def label_rois(rois, gt_rects, fg_iou=0.5, codec=AngleCodec()):
    """Assign each ROI the angle class of its best-overlapping grasp, or 0."""
    rois = np.asarray(rois, dtype=np.float64).reshape(-1, 4)
    if not gt_rects:
        raise EmptyGroundTruth("ROI labelling needs at least one ground-truth grasp")
    gt = reset_boxes(gt_rects)
    iou = box_iou_matrix(center_to_corners(rois), center_to_corners(gt))
    best_gt = iou.argmax(axis=1)
    best = iou[np.arange(len(rois)), best_gt]
    fg = best >= fg_iou
    thetas = np.array([r.theta for r in gt_rects])
    labels = np.where(fg, codec.quantize(thetas[best_gt]), 0).astype(np.int64)
    deltas = np.zeros((len(rois), 4))
    if fg.any():
        deltas[fg] = encode(rois[fg], gt[best_gt[fg]])
    return HeadTargets(labels, deltas, np.where(fg, best_gt, -1))
