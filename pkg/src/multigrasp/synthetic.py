"""Synthetic single-bar scenes with grasps across the bar.

Each image holds one bright bar on a dim, noisy table. The depth map puts the
bar above the table plane. Ground-truth grasps sit at several points along
the bar axis: plates parallel to the bar (theta = bar direction), opening
spanning the bar thickness plus a margin. Lengths are given for a 227-pixel
image and scale with ``size``.
"""
import math

import numpy as np

from .geometry import GraspRect
from .ingest import DatasetSample, DepthImage, RgbImage, compose_rgd

GRASP_OFFSETS = (-0.3, -0.15, 0.0, 0.15, 0.3)
REFERENCE_SIZE = 227


def bar_scene(rng, size=227):
    """Return (rgb uint8, depth float, bar params dict)."""
    k = size / REFERENCE_SIZE
    theta = float(rng.uniform(0.0, 180.0))
    length = float(rng.uniform(90.0, 140.0)) * k
    thick = float(rng.uniform(12.0, 20.0)) * k
    margin = 0.5 * length * abs(math.cos(math.radians(theta))) + 0.5 * thick + 14 * k
    margin_y = 0.5 * length * abs(math.sin(math.radians(theta))) + 0.5 * thick + 14 * k
    cx = float(rng.uniform(margin, size - margin))
    cy = float(rng.uniform(margin_y, size - margin_y))

    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    t = math.radians(theta)
    u = (xx - cx) * math.cos(t) + (yy - cy) * math.sin(t)
    v = -(xx - cx) * math.sin(t) + (yy - cy) * math.cos(t)
    # soft edges so the bar is not aliased
    inside = np.clip(0.5 * length - np.abs(u) + 0.5, 0, 1) * np.clip(0.5 * thick - np.abs(v) + 0.5, 0, 1)

    base = rng.uniform(30, 70, size=3)
    color = rng.uniform(190, 250, size=3)
    noise = rng.normal(0.0, 6.0, size=(size, size, 3))
    rgb = base + noise + inside[..., None] * (color - base)
    rgb = np.clip(np.floor(rgb + 0.5), 0, 255).astype(np.uint8)

    depth = 1.0 + 0.0005 * (yy - size / 2) + rng.normal(0.0, 0.001, size=(size, size))
    depth = depth - inside * float(rng.uniform(0.03, 0.06))
    params = {"cx": cx, "cy": cy, "theta": theta, "length": length, "thickness": thick, "scale": k}
    return rgb, depth, params


def bar_grasps(p, rng):
    t = math.radians(p["theta"])
    plate = float(rng.uniform(20.0, 26.0)) * p["scale"]
    opening = p["thickness"] + 18.0 * p["scale"]
    out = []
    for f in GRASP_OFFSETS:
        d = f * p["length"]
        out.append(GraspRect(p["cx"] + d * math.cos(t), p["cy"] + d * math.sin(t), p["theta"], plate, opening))
    return out


def bar_sample(rng, size=227, source_id="bar"):
    rgb, depth, p = bar_scene(rng, size)
    valid = np.ones(depth.shape, dtype=bool)
    rgd = compose_rgd(RgbImage(rgb), DepthImage(depth, valid))
    return DatasetSample(rgd, bar_grasps(p, rng), [], source_id, blue=rgb[..., 2].copy(),
                         report={"bar": p})


def bar_corpus(n, seed=0, size=227, prefix="bar"):
    rng = np.random.default_rng(seed)
    return [bar_sample(rng, size, f"{prefix}{i:04d}") for i in range(n)]
