"""Run configuration: one JSON document for every knob the CLI uses.

Sections ``network``, ``augment`` and ``train`` mirror the dataclasses of the
same names; ``paths`` names the working directories; ``split`` chooses the
train/test partition. The top-level ``seed`` seeds augmentation, training
and the split, so sections do not carry their own. Unknown keys anywhere are
rejected.

The config path comes from ``--config`` or, failing that, the
``MULTIGRASP_CONFIG`` environment variable; without either the defaults
apply.
"""
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .augment import AugmentConfig
from .detector import NetworkConfig, TrainConfig
from .errors import ConfigError

ENV_CONFIG = "MULTIGRASP_CONFIG"
SPLIT_MODES = ("image-wise", "object-wise")

DESCRIPTIONS = {
    "seed": "Seeds augmentation, weight init, sampling order and the split.",
    "network.input_size": "Side of the square network input in pixels.",
    "network.widths": "Channels of the three backbone convolutions.",
    "network.stride": "Feature-map stride in input pixels.",
    "network.head_width": "Channels of the proposal network's 3x3 convolution.",
    "network.fc_width": "Width of the fully connected layer after ROI pooling.",
    "network.pool_size": "ROI pooling output grid side.",
    "network.anchors.stride": "Anchor grid step in input pixels.",
    "network.anchors.scales": "Anchor side lengths as multiples of the stride.",
    "network.anchors.ratios": "Anchor height/width aspect ratios.",
    "network.R": "Number of orientation classes (class 0 is no grasp).",
    "network.lam": "Weight of the proposal regression loss.",
    "network.lam2": "Weight of the head regression loss.",
    "network.pre_nms": "Proposals kept by score before NMS.",
    "network.post_nms_train": "Proposals kept after NMS during training.",
    "network.post_nms_test": "Proposals kept after NMS at inference.",
    "network.proposal_nms_iou": "IoU threshold of proposal NMS.",
    "network.anchor_batch": "Anchors sampled per image for the proposal loss.",
    "network.anchor_pos_fraction": "Maximum share of positives in the anchor batch.",
    "network.roi_batch": "ROIs sampled per image for the head loss.",
    "network.roi_fg_fraction": "Maximum share of non-null ROIs in the ROI batch.",
    "network.pos_iou": "Anchor IoU at or above which an anchor is positive.",
    "network.neg_iou": "Anchor IoU below which an anchor is negative.",
    "network.fg_iou": "ROI IoU at or above which a ROI takes its gt's angle class.",
    "network.detection_nms_iou": "IoU threshold of NMS over final detections.",
    "network.score_thresh": "Minimum class score of a detection.",
    "network.max_detections": "Maximum detections returned per image.",
    "network.input_mode": "RGD (depth replaces blue) or RGB.",
    "network.mean": "Value subtracted from every input channel.",
    "network.input_scale": "Factor applied to the input after mean subtraction.",
    "network.smooth_l1": "Use smooth L1 instead of L1 for box regression.",
    "augment.crop1": "First centre crop side.",
    "augment.crop2": "Second centre crop side, after rotation.",
    "augment.max_translate": "Largest random shift in pixels along each axis.",
    "augment.out_size": "Side of the augmented output image.",
    "augment.copies": "Augmented copies per source image.",
    "augment.max_rotation": "Rotation angles are drawn from [0, max_rotation) degrees.",
    "train.epochs": "Passes over the training images.",
    "train.lr": "Initial learning rate.",
    "train.lr_step": "Iterations between learning-rate decays.",
    "train.lr_gamma": "Learning-rate decay factor.",
    "train.momentum": "SGD momentum.",
    "paths.data": "Dataset directory (<id>r.ppm, <id>d.pgm or <id>.pcd, <id>cpos.txt).",
    "paths.out": "Directory for run artifacts.",
    "paths.checkpoint": "Checkpoint file read by detect; train writes <out>/model.mgck.",
    "split.mode": "image-wise or object-wise (object ids from objects.json).",
    "split.test_fraction": "Share of images (or objects) held out for testing.",
}


@dataclass(frozen=True)
class PathsConfig:
    data: str = "data"
    out: str = "runs"
    checkpoint: str = "runs/model.mgck"


@dataclass(frozen=True)
class SplitConfig:
    mode: str = "image-wise"
    test_fraction: float = 0.2

    def __post_init__(self):
        if self.mode not in SPLIT_MODES:
            raise ConfigError(f"split.mode must be one of {SPLIT_MODES}, got {self.mode!r}")
        if not 0.0 <= self.test_fraction < 1.0:
            raise ConfigError("split.test_fraction must lie in [0, 1)")


@dataclass(frozen=True)
class RunConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    seed: int = 0

    def to_dict(self):
        aug = asdict(self.augment)
        tr = asdict(self.train)
        del aug["seed"], tr["seed"]
        return {"network": self.network.to_dict(), "augment": aug, "train": tr,
                "paths": asdict(self.paths), "split": asdict(self.split), "seed": self.seed}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        seed = d.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
        try:
            return cls(
                network=NetworkConfig.from_dict(_section(d, "network")),
                augment=replace(_build(AugmentConfig, _section(d, "augment"), "augment"), seed=seed),
                train=replace(_build(TrainConfig, _section(d, "train"), "train"), seed=seed),
                paths=_build(PathsConfig, _section(d, "paths"), "paths"),
                split=_build(SplitConfig, _section(d, "split"), "split"),
                seed=seed,
            )
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def _section(d, name):
    sec = d.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be an object")
    return sec


def _build(cls, sec, name):
    allowed = {f.name for f in fields(cls)} - {"seed"}
    extra = set(sec) - allowed
    if extra:
        raise ConfigError(f"unknown {name} keys: {sorted(extra)}")
    return cls(**sec)


def load_config(path=None):
    """Read a RunConfig from ``path``, the environment variable, or defaults."""
    path = path or os.environ.get(ENV_CONFIG) or None
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except ValueError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return RunConfig.from_dict(data)


def _flatten(d, prefix=""):
    for k in sorted(d):
        v = d[k]
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, key + ".")
        else:
            yield key, v


def defaults_reference():
    """Markdown table of every key, its default and its meaning."""
    rows = ["| key | default | meaning |", "| --- | --- | --- |"]
    for key, v in _flatten(RunConfig().to_dict()):
        rows.append(f"| `{key}` | `{json.dumps(v)}` | {DESCRIPTIONS.get(key, '')} |")
    return "\n".join(rows) + "\n"
