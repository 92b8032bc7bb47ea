"""Geometric augmentation with labels that follow the image.

Pixel (i, j) sits at continuous coordinate (x=j, y=i). Every stage of the
pipeline is an affine map from source to destination coordinates, so the
whole chain collapses into one :class:`Affine2D` that is applied to the image
once (bilinear, zero fill) and to each grasp rectangle exactly.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NonSimilarity, SingularTransform
from .geometry import GraspRect, jaccard_index
from .ingest import DatasetSample, RgdImage


@dataclass(frozen=True)
class Affine2D:
    matrix: np.ndarray  # (2, 3): [linear | translation]

    @classmethod
    def identity(cls):
        return cls(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))

    @classmethod
    def translate(cls, tx, ty):
        return cls(np.array([[1.0, 0.0, tx], [0.0, 1.0, ty]]))

    @classmethod
    def scale(cls, s, cx=0.0, cy=0.0):
        return cls(np.array([[s, 0.0, cx - s * cx], [0.0, s, cy - s * cy]]))

    @classmethod
    def rotate(cls, degrees, cx=0.0, cy=0.0):
        t = math.radians(degrees)
        c, s = math.cos(t), math.sin(t)
        return cls(np.array([[c, -s, cx - c * cx + s * cy], [s, c, cy - s * cx - c * cy]]))

    @property
    def linear(self):
        return self.matrix[:, :2]

    @property
    def det(self):
        return float(np.linalg.det(self.linear))

    def then(self, other):
        """The map applying ``self`` first and ``other`` second."""
        lin = other.linear @ self.linear
        tr = other.linear @ self.matrix[:, 2] + other.matrix[:, 2]
        return Affine2D(np.column_stack([lin, tr]))

    def inverse(self):
        if abs(self.det) <= 1e-9:
            raise SingularTransform(f"determinant {self.det:g}")
        inv = np.linalg.inv(self.linear)
        return Affine2D(np.column_stack([inv, -inv @ self.matrix[:, 2]]))

    def apply(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        return pts @ self.linear.T + self.matrix[:, 2]

    def similarity_params(self, tol=1e-9):
        """(rotation degrees, uniform scale) or NonSimilarity."""
        (a, b), (c, d) = self.linear
        s = math.hypot(a, c)
        if s <= tol or abs(a - d) > tol * max(1.0, s) or abs(b + c) > tol * max(1.0, s):
            raise NonSimilarity(f"linear part {self.linear.tolist()} is not rotation+uniform scale")
        return math.degrees(math.atan2(c, a)), s


@dataclass(frozen=True)
class AugmentConfig:
    crop1: int = 351
    crop2: int = 321
    max_translate: float = 50.0
    out_size: int = 227
    copies: int = 20
    seed: int = 0
    max_rotation: float = 360.0

    def __post_init__(self):
        from .errors import ConfigError
        if not (0 < self.crop2 <= self.crop1):
            raise ConfigError(f"need 0 < crop2 <= crop1, got {self.crop2}, {self.crop1}")
        if self.out_size <= 0 or self.copies < 0 or self.max_translate < 0:
            raise ConfigError("out_size must be positive, copies and max_translate non-negative")


def warp_array(arr, A, out_w, out_h):
    """Warp an (H, W, C) uint8 array; each output pixel samples the source at A^-1(p)."""
    minv = A.inverse().matrix
    src = np.ascontiguousarray(arr, dtype=np.float64)
    squeeze = src.ndim == 2
    if squeeze:
        src = src[..., None]
    out = kernels.warp_bilinear(src, np.ascontiguousarray(minv), int(out_h), int(out_w))
    out = np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)
    return out[..., 0] if squeeze else out


def warp_image(img, A, out_w, out_h):
    return type(img)(warp_array(img.data, A, out_w, out_h))


def warp_rect(r, A):
    phi, s = A.similarity_params()
    x, y = A.apply([r.x, r.y])
    return GraspRect(float(x), float(y), (r.theta + phi) % 180.0, r.w * s, r.h * s)


def _crop(size_from_w, size_from_h, size_to):
    return Affine2D.translate(-(size_from_w - size_to) / 2, -(size_from_h - size_to) / 2)


def pipeline_stages(width, height, cfg, angle=0.0, shift=(0.0, 0.0)):
    """The five stage transforms, in application order."""
    c1, c2 = cfg.crop1, cfg.crop2
    mid = (c1 - 1) / 2
    s = cfg.out_size / c2
    return [
        _crop(width, height, c1),
        Affine2D.rotate(angle, mid, mid),
        _crop(c1, c1, c2),
        Affine2D.translate(float(shift[0]), float(shift[1])),
        Affine2D(np.array([[s, 0.0, 0.5 * s - 0.5], [0.0, s, 0.5 * s - 0.5]])),
    ]


def stage_sizes(cfg):
    return [cfg.crop1, cfg.crop1, cfg.crop2, cfg.crop2, cfg.out_size]


def compose(stages):
    A = Affine2D.identity()
    for st in stages:
        A = A.then(st)
    return A


def pipeline_affine(width, height, cfg, angle=0.0, shift=(0.0, 0.0)):
    return compose(pipeline_stages(width, height, cfg, angle, shift))


def draw_params(cfg, rng):
    angle = float(rng.uniform(0.0, cfg.max_rotation)) if cfg.max_rotation > 0 else 0.0
    if cfg.max_translate > 0:
        shift = rng.uniform(-cfg.max_translate, cfg.max_translate, size=2)
    else:
        shift = np.zeros(2)
    return angle, (float(shift[0]), float(shift[1]))


def transform_sample(s, A, out_w, out_h, source_id=None):
    """Apply ``A`` to image, blue channel and labels; drop rects wholly outside the frame."""
    frame = GraspRect(out_w / 2, out_h / 2, 0.0, float(out_w), float(out_h))
    stack = s.rgd.data if s.blue is None else np.dstack([s.rgd.data, s.blue])
    warped = warp_array(stack, A, out_w, out_h)
    rgd = RgdImage(np.ascontiguousarray(warped[..., :3]))
    blue = None if s.blue is None else np.ascontiguousarray(warped[..., 3])

    def move(rects):
        out = [warp_rect(r, A) for r in rects]
        kept = [r for r in out if jaccard_index(r, frame) > 0.0]
        return kept, len(out) - len(kept)

    pos, dp = move(s.positives)
    neg, dn = move(s.negatives)
    report = dict(s.report, augment_dropped={"positives": dp, "negatives": dn})
    return DatasetSample(rgd, pos, neg, source_id or s.source_id, blue=blue, report=report)


def augment_sample(s, cfg, rng, source_id=None):
    """One random augmentation of ``s``: crop1, rotate, crop2, translate, resize."""
    angle, shift = draw_params(cfg, rng)
    A = pipeline_affine(s.width, s.height, cfg, angle, shift)
    return transform_sample(s, A, cfg.out_size, cfg.out_size, source_id)


def augment_dataset(samples, cfg):
    """``cfg.copies`` augmentations per sample from one seeded generator."""
    rng = np.random.default_rng(cfg.seed)
    out = []
    for s in samples:
        for k in range(cfg.copies):
            out.append(augment_sample(s, cfg, rng, source_id=f"{s.source_id}_{k:04d}"))
    return out


def fit_transform(width, height, size):
    """Deterministic centre crop + resize mapping a ``width`` x ``height`` image to ``size``."""
    if width == size and height == size:
        return Affine2D.identity()
    side = min(width, height)
    cfg = AugmentConfig(crop1=side, crop2=side, max_translate=0.0, out_size=size, copies=1, max_rotation=0.0)
    return pipeline_affine(width, height, cfg)


def fit_sample(s, size):
    A = fit_transform(s.width, s.height, size)
    if np.array_equal(A.matrix, Affine2D.identity().matrix):
        return s, A
    return transform_sample(s, A, size, size), A


__all__ = [
    "Affine2D", "AugmentConfig", "warp_image", "warp_array", "warp_rect", "pipeline_stages",
    "pipeline_affine", "augment_sample", "augment_dataset", "transform_sample", "fit_transform",
    "fit_sample", "compose", "stage_sizes",
]
