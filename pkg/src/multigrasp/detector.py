"""Two-stage grasp detector at toy scale.

A three-block convolutional backbone produces a stride-16 feature map. The
grasp proposal network scores and regresses the anchors on that map; the
best proposals are ROI-pooled and passed through a fully connected layer to
two sibling outputs: R+1 orientation-class scores (class 0 = no grasp) and
per-class box deltas.
"""
import csv
import json
import logging
import math
from collections import namedtuple
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import autodiff as ad
from .augment import fit_transform, fit_sample, warp_rect
from .encoding import (NEGATIVE, POSITIVE, AngleCodec, AnchorConfig, GpnTargets, HeadTargets, clip_boxes,
                       decode, generate_anchors, label_anchors, label_rois, reset_boxes)
from .errors import (ConfigError, DataError, IncompatibleCheckpoint, MissingField, NoSampledAnchors, NoSampledRois,
                     NonFiniteLoss, ShapeMismatch)
from .geometry import GraspRect, center_to_corners, nms

log = logging.getLogger(__name__)

MEAN_PIXEL = 144.0
DETECTIONS_SCHEMA_VERSION = 1
_DETECTION_FIELDS = ("x", "y", "theta", "w", "h", "score", "class")


@dataclass(frozen=True)
class NetworkConfig:
    input_size: int = 227
    widths: tuple = (16, 32, 32)
    stride: int = 16
    head_width: int = 128
    fc_width: int = 256
    pool_size: int = 7
    anchors: AnchorConfig = field(default_factory=AnchorConfig)
    R: int = 19
    lam: float = 1.0
    lam2: float = 1.0
    pre_nms: int = 300
    post_nms_train: int = 64
    post_nms_test: int = 32
    proposal_nms_iou: float = 0.7
    anchor_batch: int = 256
    anchor_pos_fraction: float = 0.5
    roi_batch: int = 64
    roi_fg_fraction: float = 0.25
    pos_iou: float = 0.7
    neg_iou: float = 0.3
    fg_iou: float = 0.5
    detection_nms_iou: float = 0.5
    score_thresh: float = 0.0
    max_detections: int = 25
    input_mode: str = "RGD"
    mean: float = MEAN_PIXEL
    input_scale: float = 0.125
    smooth_l1: bool = False

    def __post_init__(self):
        if any(w <= 0 for w in self.widths) or self.head_width <= 0 or self.fc_width <= 0:
            raise ConfigError("layer widths must be positive")
        if len(self.widths) != 3:
            raise ConfigError("backbone takes exactly three widths")
        if self.lam < 0 or self.lam2 < 0:
            raise ConfigError("loss weights must be non-negative")
        if self.input_mode.upper() not in ("RGB", "RGD"):
            raise ConfigError(f"input_mode must be RGB or RGD, got {self.input_mode!r}")
        if not self.input_scale > 0:
            raise ConfigError("input_scale must be positive")
        if self.input_size < 16:
            raise ConfigError("input_size must be at least 16")
        if isinstance(self.anchors, dict):
            object.__setattr__(self, "anchors", AnchorConfig(**self.anchors))

    @property
    def codec(self):
        return AngleCodec(self.R)

    @property
    def feature_size(self):
        s = (self.input_size - 1) // 2 + 1
        for _ in range(3):
            s //= 2
        return s

    def to_dict(self):
        d = asdict(self)
        d["widths"] = list(self.widths)
        d["anchors"] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in d["anchors"].items()}
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown network keys: {sorted(extra)}")
        d = dict(d)
        if "widths" in d:
            d["widths"] = tuple(d["widths"])
        if "anchors" in d:
            a = dict(d["anchors"])
            extra = set(a) - {f.name for f in fields(AnchorConfig)}
            if extra:
                raise ConfigError(f"unknown anchor keys: {sorted(extra)}")
            for k in ("scales", "ratios"):
                if k in a:
                    a[k] = tuple(a[k])
            d["anchors"] = AnchorConfig(**a)
        return cls(**d)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    lr: float = 1e-4
    lr_step: int = 10000
    lr_gamma: float = 0.1
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.lr < 0 or self.lr_step <= 0 or not 0 <= self.momentum < 1:
            raise ConfigError("invalid training settings")


@dataclass
class GpnPrediction:
    logits: ad.DiffArray  # (N, 2): [no grasp, grasp]
    deltas: ad.DiffArray  # (N, 4)

    @property
    def probabilities(self):
        return ad.softmax(self.logits.value)[:, 1]


@dataclass
class HeadPrediction:
    logits: ad.DiffArray  # (N, R + 1)
    deltas: ad.DiffArray  # (N, 4 (R + 1))

    @property
    def probabilities(self):
        return ad.softmax(self.logits.value)


@dataclass(frozen=True)
class Detection:
    rect: GraspRect
    score: float
    cls: int

    def to_json(self):
        r = self.rect
        return {"x": r.x, "y": r.y, "theta": r.theta, "w": r.w, "h": r.h,
                "score": self.score, "class": self.cls, "schema_version": DETECTIONS_SCHEMA_VERSION}

    @classmethod
    def from_json(cls, d, source=None):
        if not isinstance(d, dict):
            raise DataError("detection entry must be an object", source)
        missing = [k for k in _DETECTION_FIELDS if k not in d]
        if missing:
            raise MissingField(f"detection lacks {missing}", source)
        if d.get("schema_version", DETECTIONS_SCHEMA_VERSION) != DETECTIONS_SCHEMA_VERSION:
            raise DataError(f"unsupported detections schema_version {d['schema_version']!r}", source)
        try:
            rect = GraspRect(float(d["x"]), float(d["y"]), float(d["theta"]), float(d["w"]), float(d["h"]))
            return cls(rect, float(d["score"]), int(d["class"]))
        except (TypeError, ValueError) as exc:
            raise DataError(f"bad detection values: {exc}", source) from None


def detections_json(dets):
    """Detections as a JSON list, in the given order."""
    return json.dumps([d.to_json() for d in dets], indent=2, sort_keys=True) + "\n"


def parse_detections(data, source=None):
    try:
        items = json.loads(data)
    except ValueError as exc:
        raise DataError(f"invalid JSON: {exc}", source) from None
    if not isinstance(items, list):
        raise DataError("detections file must hold a JSON list", source)
    return [Detection.from_json(d, source) for d in items]


LossTerms = namedtuple("LossTerms", "total cls reg")


def _zero(dtype):
    return ad.constant(0.0, dtype=dtype)


def _regression(pred, target, smooth):
    return ad.smooth_l1_loss(pred, target) if smooth else ad.l1_loss(pred, target)


def loss_gpn(pred, targets, lam=1.0, sample=None, smooth=False):
    """Proposal loss: cross-entropy over sampled anchors plus ``lam`` times L1
    over the sampled positives (mean over their delta components)."""
    if sample is None:
        sample = np.flatnonzero(targets.labels != -1)
    sample = np.asarray(sample, dtype=np.int64)
    if sample.size == 0:
        raise NoSampledAnchors("no anchors sampled")
    labels = targets.labels[sample]
    if np.any(labels < 0):
        raise NoSampledAnchors("sampled anchors include ignored ones")
    cls = ad.softmax_cross_entropy(ad.index(pred.logits, sample), labels)
    pos = sample[labels == POSITIVE]
    if pos.size == 0:
        reg = _zero(pred.logits.dtype)
    else:
        reg = ad.scale(_regression(ad.index(pred.deltas, pos), targets.deltas[pos], smooth), lam)
    return LossTerms(ad.add(cls, reg), cls, reg)


def loss_gcr(pred, targets, lam2=1.0, sample=None, smooth=False):
    """Head loss: cross-entropy over classes 0..R plus ``lam2`` times L1 on the
    labelled class's deltas for ROIs whose label is not 0."""
    if sample is None:
        sample = np.arange(len(targets.labels))
    sample = np.asarray(sample, dtype=np.int64)
    if sample.size == 0:
        raise NoSampledRois("no ROIs sampled")
    labels = targets.labels[sample]
    cls = ad.softmax_cross_entropy(ad.index(pred.logits, sample), labels)
    fg = sample[labels != 0]
    if fg.size == 0:
        reg = _zero(pred.logits.dtype)
    else:
        n_cls = pred.logits.shape[1]
        per_class = ad.reshape(pred.deltas, (pred.deltas.shape[0], n_cls, 4))
        picked = ad.index(per_class, (fg, targets.labels[fg]))
        reg = ad.scale(_regression(picked, targets.deltas[fg], smooth), lam2)
    return LossTerms(ad.add(cls, reg), cls, reg)


def loss_total(l_gpn, l_gcr):
    out = ad.add(l_gpn, l_gcr)
    if not np.isfinite(out.value).all():
        raise NonFiniteLoss(f"loss is {float(out.value)} (gpn {float(l_gpn.value)}, gcr {float(l_gcr.value)})")
    return out


def to_tensor(img, mean=MEAN_PIXEL, dtype=np.float32, scale=1.0):
    """(H, W, 3) uint8 to a mean-subtracted, scaled (1, 3, H, W) constant."""
    x = np.asarray(img, dtype=dtype).transpose(2, 0, 1)[None] - np.asarray(mean, dtype=dtype)
    if scale != 1.0:
        x = x * np.asarray(scale, dtype=dtype)
    return ad.DiffArray(np.ascontiguousarray(x))


def sample_indices(pos, neg, batch, pos_fraction, rng):
    """Random subset with at most ``batch * pos_fraction`` positives, filled with negatives."""
    n_pos = min(len(pos), int(batch * pos_fraction))
    pos = rng.permutation(pos)[:n_pos] if len(pos) else pos
    n_neg = min(len(neg), batch - n_pos)
    neg = rng.permutation(neg)[:n_neg] if len(neg) else neg
    return np.sort(np.concatenate([pos, neg]).astype(np.int64))


class GraspDetector:
    def __init__(self, cfg=NetworkConfig(), seed=0, dtype=np.float32):
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        self.params = self._init_params(np.random.default_rng(seed))
        fs = cfg.feature_size
        self.anchors = clip_boxes(generate_anchors(fs, fs, cfg.anchors), cfg.input_size, cfg.input_size)

    # --- parameters -----------------------------------------------------------

    def param_shapes(self):
        c = self.cfg
        k = c.anchors.k
        w1, w2, w3 = c.widths
        n_cls = c.R + 1
        return {
            "conv1.w": (w1, 3, 3, 3), "conv1.b": (w1,),
            "conv2.w": (w2, w1, 3, 3), "conv2.b": (w2,),
            "conv3.w": (w3, w2, 3, 3), "conv3.b": (w3,),
            "gpn.conv.w": (c.head_width, w3, 3, 3), "gpn.conv.b": (c.head_width,),
            "gpn.cls.w": (2 * k, c.head_width, 1, 1), "gpn.cls.b": (2 * k,),
            "gpn.reg.w": (4 * k, c.head_width, 1, 1), "gpn.reg.b": (4 * k,),
            "head.fc.w": (c.fc_width, w3 * c.pool_size ** 2), "head.fc.b": (c.fc_width,),
            "head.cls.w": (n_cls, c.fc_width), "head.cls.b": (n_cls,),
            "head.reg.w": (4 * n_cls, c.fc_width), "head.reg.b": (4 * n_cls,),
        }

    def _init_params(self, rng):
        out = {}
        small = {"gpn.cls.w": 0.01, "gpn.reg.w": 0.01, "head.cls.w": 0.01, "head.reg.w": 0.001}
        for name, shape in self.param_shapes().items():
            if name.endswith(".b"):
                v = np.zeros(shape)
            elif name in small:
                v = rng.normal(0.0, small[name], size=shape)
            else:
                fan_in = int(np.prod(shape[1:]))
                v = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=shape)
            out[name] = ad.parameter(v.astype(self.dtype), name=name)
        return out

    def state_dict(self):
        return {k: p.value for k, p in self.params.items()}

    def load_state_dict(self, state):
        shapes = self.param_shapes()
        if set(state) != set(shapes):
            raise IncompatibleCheckpoint(f"parameter names differ: missing {sorted(set(shapes) - set(state))}, "
                                         f"unexpected {sorted(set(state) - set(shapes))}")
        for k, shape in shapes.items():
            if tuple(state[k].shape) != shape:
                raise IncompatibleCheckpoint(f"{k}: checkpoint shape {tuple(state[k].shape)}, model {shape}")
            self.params[k].value = np.array(state[k], dtype=self.dtype)

    def save(self, path):
        ad.checkpoint.save(path, self.state_dict(), {"network": self.cfg.to_dict()})

    @classmethod
    def load(cls, path, cfg=None):
        state, meta = ad.checkpoint.load(path)
        if cfg is None:
            if "network" not in meta:
                raise IncompatibleCheckpoint("checkpoint carries no network config", str(path))
            cfg = NetworkConfig.from_dict(meta["network"])
        model = cls(cfg)
        model.load_state_dict(state)
        return model

    # --- forward --------------------------------------------------------------

    def backbone(self, x):
        p = self.params
        if x.value.ndim != 4 or x.shape[1] != 3:
            raise ShapeMismatch(f"backbone wants (1, 3, H, W), got {x.shape}")
        h = ad.relu(ad.conv2d(x, p["conv1.w"], p["conv1.b"], stride=2, pad=1))
        h = ad.max_pool2d(h)
        h = ad.relu(ad.conv2d(h, p["conv2.w"], p["conv2.b"], stride=1, pad=1))
        h = ad.max_pool2d(h)
        h = ad.relu(ad.conv2d(h, p["conv3.w"], p["conv3.b"], stride=1, pad=1))
        return ad.max_pool2d(h)

    def gpn(self, feat):
        p = self.params
        h = ad.relu(ad.conv2d(feat, p["gpn.conv.w"], p["gpn.conv.b"], pad=1))
        cls = ad.conv2d(h, p["gpn.cls.w"], p["gpn.cls.b"])
        reg = ad.conv2d(h, p["gpn.reg.w"], p["gpn.reg.b"])
        cls = ad.reshape(ad.transpose(cls, (0, 2, 3, 1)), (-1, 2))
        reg = ad.reshape(ad.transpose(reg, (0, 2, 3, 1)), (-1, 4))
        return GpnPrediction(cls, reg)

    def head(self, feat, rois):
        """``rois``: (R, 4) centre-form boxes in input-image pixels."""
        p = self.params
        c = self.cfg
        pooled = ad.roi_pool(feat, center_to_corners(rois), (c.pool_size, c.pool_size), 1.0 / c.stride)
        flat = ad.reshape(pooled, (len(rois), -1))
        h = ad.relu(ad.affine(flat, p["head.fc.w"], p["head.fc.b"]))
        return HeadPrediction(ad.affine(h, p["head.cls.w"], p["head.cls.b"]),
                              ad.affine(h, p["head.reg.w"], p["head.reg.b"]))

    def propose(self, pred, training=False):
        """Decoded, clipped, NMS-filtered proposals as (boxes, scores)."""
        c = self.cfg
        scores = pred.probabilities.astype(np.float64)
        boxes = decode(self.anchors, pred.deltas.value.astype(np.float64))
        boxes = clip_boxes(boxes, c.input_size, c.input_size)
        ok = (boxes[:, 2] >= 1.0) & (boxes[:, 3] >= 1.0)
        boxes, scores = boxes[ok], scores[ok]
        order = np.argsort(-scores, kind="stable")[:c.pre_nms]
        boxes, scores = boxes[order], scores[order]
        keep = nms(center_to_corners(boxes), scores, c.proposal_nms_iou)
        keep = keep[:c.post_nms_train if training else c.post_nms_test]
        return boxes[keep], scores[keep]

    def input_tensor(self, img):
        return to_tensor(img, self.cfg.mean, self.dtype, self.cfg.input_scale)

    # --- training -------------------------------------------------------------

    def gpn_targets(self, gts):
        if not gts:
            n = len(self.anchors)
            return GpnTargets(np.full(n, NEGATIVE), np.zeros((n, 4)), np.full(n, -1))
        c = self.cfg
        return label_anchors(self.anchors, reset_boxes(gts), c.pos_iou, c.neg_iou)

    def head_targets(self, rois, gts):
        if not gts:
            n = len(rois)
            return HeadTargets(np.zeros(n, dtype=np.int64), np.zeros((n, 4)), np.full(n, -1))
        return label_rois(rois, gts, self.cfg.fg_iou, self.cfg.codec)

    def training_losses(self, img, gts, rng):
        """Forward one image; returns (total, gpn LossTerms, gcr LossTerms)."""
        c = self.cfg
        feat = self.backbone(self.input_tensor(img))
        gp = self.gpn(feat)
        gt_t = self.gpn_targets(gts)
        a_sample = sample_indices(gt_t.positives, gt_t.negatives, c.anchor_batch, c.anchor_pos_fraction, rng)
        l_gpn = loss_gpn(gp, gt_t, c.lam, a_sample, c.smooth_l1)

        rois, _ = self.propose(gp, training=True)
        if gts:
            rois = np.concatenate([rois, reset_boxes(gts)])
        ht = self.head_targets(rois, gts)
        r_sample = sample_indices(np.flatnonzero(ht.labels != 0), np.flatnonzero(ht.labels == 0),
                                  c.roi_batch, c.roi_fg_fraction, rng)
        rois = rois[r_sample]
        ht = HeadTargets(ht.labels[r_sample], ht.deltas[r_sample], ht.matched[r_sample])
        hp = self.head(feat, rois)
        l_gcr = loss_gcr(hp, ht, c.lam2, None, c.smooth_l1)
        return loss_total(l_gpn.total, l_gcr.total), l_gpn, l_gcr

    # --- inference ------------------------------------------------------------

    def detect_prepared(self, img, score_thresh=None, max_out=None):
        """Detections for an image already at ``input_size``."""
        c = self.cfg
        score_thresh = c.score_thresh if score_thresh is None else score_thresh
        max_out = c.max_detections if max_out is None else max_out
        feat = self.backbone(self.input_tensor(img))
        rois, _ = self.propose(self.gpn(feat), training=False)
        if len(rois) == 0:
            return []
        hp = self.head(feat, rois)
        prob = hp.probabilities.astype(np.float64)
        cls = prob.argmax(axis=1)
        keep = np.flatnonzero(cls != 0)
        if keep.size == 0:
            return []
        cls = cls[keep]
        score = prob[keep, cls]
        deltas = hp.deltas.value.astype(np.float64).reshape(len(rois), -1, 4)[keep, cls]
        boxes = clip_boxes(decode(rois[keep], deltas), c.input_size, c.input_size)
        ok = (score >= score_thresh) & (boxes[:, 2] > 0) & (boxes[:, 3] > 0)
        boxes, score, cls = boxes[ok], score[ok], cls[ok]
        order = nms(center_to_corners(boxes), score, c.detection_nms_iou)[:max_out]
        angles = c.codec.angle(cls[order]) if order.size else []
        return [Detection(GraspRect(*map(float, boxes[i, :2]), float(a), *map(float, boxes[i, 2:])),
                          float(score[i]), int(cls[i]))
                for i, a in zip(order, angles)]

    def detect(self, img, score_thresh=None, max_out=None):
        """Detections in the coordinates of ``img`` (any size)."""
        h, w = img.shape[:2]
        A = fit_transform(w, h, self.cfg.input_size)
        if A.matrix.tolist() == [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]:
            return self.detect_prepared(img, score_thresh, max_out)
        from .augment import warp_array
        small = warp_array(img, A, self.cfg.input_size, self.cfg.input_size)
        inv = A.inverse()
        return [Detection(warp_rect(d.rect, inv), d.score, d.cls)
                for d in self.detect_prepared(small, score_thresh, max_out)]


def detect(img, model, score_thresh=None, max_out=None):
    return model.detect(img, score_thresh, max_out)


@dataclass
class TrainResult:
    model: GraspDetector
    rows: list  # per-iteration metric dicts
    epochs: list  # per-epoch summary dicts


METRIC_FIELDS = ("epoch", "iteration", "lr", "loss_gpn", "loss_gcr", "loss_total")


def train(samples, cfg=NetworkConfig(), tcfg=TrainConfig(), eval_samples=None, model=None, progress=None):
    """SGD over ``samples`` (one image per step) for ``tcfg.epochs`` epochs.

    Per epoch, top-1 success on ``eval_samples`` (default: the training
    samples) is recorded.
    """
    from .evaluation import top1_accuracy

    if not samples:
        raise ValueError("training needs at least one sample")
    seeds = np.random.SeedSequence(tcfg.seed).spawn(2)
    model = model or GraspDetector(cfg, seed=int(seeds[0].generate_state(1)[0]))
    rng = np.random.default_rng(seeds[1])
    prepared = [fit_sample(s, cfg.input_size)[0] for s in samples]
    images = [s.input_image(cfg.input_mode) for s in prepared]
    opt = ad.SGD(model.params.values(), tcfg.lr, tcfg.momentum, tcfg.lr_step, tcfg.lr_gamma)
    rows, epochs = [], []
    ev = prepared if eval_samples is None else [fit_sample(s, cfg.input_size)[0] for s in eval_samples]
    for epoch in range(tcfg.epochs):
        order = rng.permutation(len(prepared))
        for i in order:
            lr = opt.lr
            total, lg, lc = model.training_losses(images[i], prepared[i].positives, rng)
            opt.zero_grad()
            total.backward()
            opt.step()
            rows.append({"epoch": epoch, "iteration": opt.iteration, "lr": lr,
                         "loss_gpn": float(lg.total.value), "loss_gcr": float(lc.total.value),
                         "loss_total": float(total.value)})
        recent = [r["loss_total"] for r in rows[-len(order):]]
        results = [(model.detect_prepared(s.input_image(cfg.input_mode)), s.positives) for s in ev]
        summary = {"epoch": epoch, "mean_loss": float(np.mean(recent)), "top1": top1_accuracy(results)}
        epochs.append(summary)
        log.info("epoch %d loss %.4f top1 %.3f", epoch, summary["mean_loss"], summary["top1"])
        if progress is not None:
            progress(summary)
    return TrainResult(model, rows, epochs)


def write_metrics_csv(path, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=METRIC_FIELDS, lineterminator="\n")
        wr.writeheader()
        for r in rows:
            wr.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
