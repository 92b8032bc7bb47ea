"""Scoring protocols: top-1 accuracy, Jaccard sweep, miss rate vs FPPI, grasp selection.

A "result" is a pair ``(detections, gts)`` for one image, where detections
are :class:`~multigrasp.detector.Detection`-like objects with ``rect`` and
``score`` attributes and gts are :class:`~multigrasp.geometry.GraspRect`.
"""
import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDataset, NoDetections
from .geometry import DEFAULT_ANGLE, DEFAULT_JACCARD, angle_difference, jaccard_batch, rects_to_array

SWEEP_THRESHOLDS = (0.25, 0.30, 0.35, 0.40)


@dataclass
class MatchResult:
    pairs: list  # (det index, gt index)
    false_positives: list  # det indices
    misses: list  # gt indices


@dataclass(frozen=True)
class CurvePoint:
    threshold: float
    fppi: float
    miss_rate: float


def _score_order(dets):
    return sorted(range(len(dets)), key=lambda i: -dets[i].score)


def match_detections(dets, gts, j_thresh=DEFAULT_JACCARD, a_thresh=DEFAULT_ANGLE):
    """Greedy one-to-one matching in descending score order.

    Each detection claims the unclaimed ground truth with the highest Jaccard
    index among those it is correct for; ties go to the lower gt index.
    """
    pairs, fps = [], []
    claimed = np.zeros(len(gts), dtype=bool)
    if gts:
        gt_arr = rects_to_array(gts)
    for i in _score_order(dets):
        if not gts:
            fps.append(i)
            continue
        d = dets[i].rect
        jac = jaccard_batch(np.tile(rects_to_array([d]), (len(gts), 1)), gt_arr)
        ang = np.array([angle_difference(d.theta, g.theta) for g in gts])
        ok = (~claimed) & (ang <= a_thresh) & (jac > j_thresh)
        if ok.any():
            cand = np.where(ok, jac, -1.0)
            g = int(np.argmax(cand))  # first index among equal maxima
            claimed[g] = True
            pairs.append((i, g))
        else:
            fps.append(i)
    misses = [g for g in range(len(gts)) if not claimed[g]]
    return MatchResult(pairs, fps, misses)


def top_detection(dets):
    if not dets:
        return None
    return dets[_score_order(dets)[0]]


def image_correct(det, gts, j_thresh=DEFAULT_JACCARD, a_thresh=DEFAULT_ANGLE):
    if det is None or not gts:
        return False
    jac = jaccard_batch(np.tile(rects_to_array([det.rect]), (len(gts), 1)), rects_to_array(gts))
    ang = np.array([angle_difference(det.rect.theta, g.theta) for g in gts])
    return bool(np.any((ang <= a_thresh) & (jac > j_thresh)))


def top1_accuracy(results, j_thresh=DEFAULT_JACCARD, a_thresh=DEFAULT_ANGLE):
    """Fraction of images whose highest-scoring detection is correct for any gt."""
    results = list(results)
    if not results:
        raise EmptyDataset("no images to score")
    hits = sum(image_correct(top_detection(d), g, j_thresh, a_thresh) for d, g in results)
    return hits / len(results)


def jaccard_sweep(results, thresholds=SWEEP_THRESHOLDS, a_thresh=DEFAULT_ANGLE):
    results = list(results)
    return {float(t): top1_accuracy(results, t, a_thresh) for t in thresholds}


def threshold_grid(results):
    scores = {float(d.score) for dets, _ in results for d in dets}
    return sorted(scores | {0.0, 1.0}, reverse=True)


def sweep_counts(results, thresholds=None, j_thresh=DEFAULT_JACCARD, a_thresh=DEFAULT_ANGLE):
    """Per threshold (descending): (threshold, pairs, false positives, misses)."""
    results = list(results)
    if not results:
        raise EmptyDataset("no images to score")
    if thresholds is None:
        thresholds = threshold_grid(results)
    thresholds = sorted((float(t) for t in thresholds), reverse=True)
    out = []
    for t in thresholds:
        p = fp = miss = 0
        for dets, gts in results:
            m = match_detections([d for d in dets if d.score >= t], gts, j_thresh, a_thresh)
            p += len(m.pairs)
            fp += len(m.false_positives)
            miss += len(m.misses)
        out.append((t, p, fp, miss))
    return out


def fppi_curve(results, thresholds=None, j_thresh=DEFAULT_JACCARD, a_thresh=DEFAULT_ANGLE):
    """Miss rate against false positives per image, one point per score threshold."""
    results = list(results)
    counts = sweep_counts(results, thresholds, j_thresh, a_thresh)
    n_img = len(results)
    n_gt = sum(len(g) for _, g in results)
    return [CurvePoint(t, fp / n_img, (miss / n_gt) if n_gt else 0.0) for t, _, fp, miss in counts]


def miss_rate_at(curve, fppi=1.0):
    """Lowest miss rate reached with at most ``fppi`` false positives per image."""
    ok = [p.miss_rate for p in curve if p.fppi <= fppi]
    return min(ok) if ok else 1.0


def select_grasp(dets, policy="top1", object_center=None, n=25):
    """Pick one detection: ``top1`` (best score) or ``nearest`` (closest centre among top ``n``)."""
    if not dets:
        raise NoDetections("no detections to select from")
    order = _score_order(dets)
    if policy == "top1":
        return dets[order[0]]
    if policy != "nearest":
        raise ValueError(f"unknown policy {policy!r}")
    if object_center is None:
        raise ValueError("nearest-to-centre policy needs object_center")
    cx, cy = object_center
    top = order[:max(1, n)]
    # order is score-descending, so min() keeps the higher score on distance ties
    best = min(top, key=lambda i: np.hypot(dets[i].rect.x - cx, dets[i].rect.y - cy))
    return dets[best]


def gt_centroid(gts):
    return (float(np.mean([g.x for g in gts])), float(np.mean([g.y for g in gts])))


def split_ids(ids, object_of=None, mode="image-wise", test_fraction=0.2, seed=0):
    """Deterministic train/test partition by image id or by object id."""
    ids = sorted(ids)
    rng = np.random.default_rng(seed)
    if mode == "image-wise":
        units = ids
        unit_of = {i: i for i in ids}
    elif mode == "object-wise":
        object_of = object_of or {}
        unit_of = {i: object_of.get(i, i) for i in ids}
        units = sorted(set(unit_of.values()))
    else:
        raise ValueError(f"unknown split mode {mode!r}")
    perm = rng.permutation(len(units))
    n_test = int(round(test_fraction * len(units)))
    test_units = {units[k] for k in perm[:n_test]}
    test = [i for i in ids if unit_of[i] in test_units]
    train = [i for i in ids if unit_of[i] not in test_units]
    return {"mode": mode, "seed": seed, "test_fraction": test_fraction, "train": train, "test": test}


def accuracy_reports(results, split="image-wise", thresholds=SWEEP_THRESHOLDS, a_thresh=DEFAULT_ANGLE):
    results = list(results)
    sweep = jaccard_sweep(results, thresholds, a_thresh)
    return [{"split": split, "jaccard_threshold": t, "angle_threshold": a_thresh,
             "accuracy": acc, "n_images": len(results)} for t, acc in sweep.items()]


def curve_csv(curve):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["threshold", "fppi", "miss_rate"])
    for p in curve:
        wr.writerow([repr(p.threshold), repr(p.fppi), repr(p.miss_rate)])
    return buf.getvalue()


def reports_json(reports):
    return json.dumps(reports, indent=2, sort_keys=True) + "\n"
