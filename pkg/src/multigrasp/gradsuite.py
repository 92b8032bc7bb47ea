"""Finite-difference checks for every differentiable kernel and a micro network.

Each check builds seeded float64 inputs, reduces the kernel output to a
scalar with a fixed random weighting and compares backward against central
differences. Inputs are drawn so that no max-pool window, ReLU or L1 term
sits within ``eps`` of a kink.
"""
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

KERNEL_TOL = 1e-4
NETWORK_TOL = 1e-3


@dataclass(frozen=True)
class CheckResult:
    name: str
    error: float
    tol: float

    @property
    def ok(self):
        return self.error < self.tol


def _weighted(out, w):
    return ad.total(ad.mul(out, ad.constant(w)))


def _away_from_zero(rng, shape, gap=0.05):
    v = rng.normal(0.0, 1.0, size=shape)
    return np.where(np.abs(v) < gap, np.sign(v + 1e-300) * gap, v) + 0.0


def _distinct(rng, shape):
    """Shuffled values with pairwise gaps of at least 0.009, so no max ties."""
    n = int(np.prod(shape))
    return (rng.permutation(n) * 0.01 + rng.uniform(0, 1e-3, n)).reshape(shape)


def _check(name, fn, inputs, tol=KERNEL_TOL):
    return CheckResult(name, ad.gradient_check(fn, inputs), tol)


def kernel_checks(seed=0):
    rng = np.random.default_rng(seed)
    D = ad.DiffArray
    out = []

    for stride, pad in ((1, 1), (2, 0)):
        x = D(rng.normal(size=(2, 3, 7, 6)), True)
        w = D(rng.normal(size=(4, 3, 3, 3)), True)
        b = D(rng.normal(size=4), True)
        oh, ow = (7 + 2 * pad - 3) // stride + 1, (6 + 2 * pad - 3) // stride + 1
        wt = rng.normal(size=(2, 4, oh, ow))
        out.append(_check(f"conv2d[s{stride}p{pad}]",
                          lambda a, s=stride, p=pad, wt=wt: _weighted(ad.conv2d(a[0], a[1], a[2], s, p), wt),
                          [x, w, b]))

    x = D(_away_from_zero(rng, (3, 5)), True)
    wt = rng.normal(size=(3, 5))
    out.append(_check("relu", lambda a: _weighted(ad.relu(a[0]), wt), [x]))

    x = D(_distinct(rng, (2, 2, 5, 6)), True)
    wt = rng.normal(size=(2, 2, 2, 3))
    out.append(_check("max_pool2d", lambda a: _weighted(ad.max_pool2d(a[0]), wt), [x]))

    x = D(rng.normal(size=(2, 3, 4, 5)), True)
    wt = rng.normal(size=(2, 3))
    out.append(_check("global_avg_pool", lambda a: _weighted(ad.global_avg_pool(a[0]), wt), [x]))

    x, w, b = D(rng.normal(size=(4, 6)), True), D(rng.normal(size=(3, 6)), True), D(rng.normal(size=3), True)
    wt = rng.normal(size=(4, 3))
    out.append(_check("affine", lambda a: _weighted(ad.affine(a[0], a[1], a[2]), wt), [x, w, b]))

    feat = D(_distinct(rng, (1, 2, 6, 7)), True)
    rois = np.array([[0.0, 0.0, 95.0, 80.0], [20.0, 10.0, 60.0, 90.0], [40.0, 40.0, 41.0, 44.0]])
    wt = rng.normal(size=(3, 2, 3, 3))
    out.append(_check("roi_pool", lambda a: _weighted(ad.roi_pool(a[0], rois, (3, 3), 1.0 / 16), wt), [feat]))

    z = D(rng.normal(size=(5, 4)), True)
    lab = rng.integers(0, 4, size=5)
    out.append(_check("softmax_cross_entropy", lambda a: ad.softmax_cross_entropy(a[0], lab), [z]))

    p, t = D(rng.normal(size=(3, 4)), True), D(rng.normal(size=(3, 4)), True)
    t.value = p.value + _away_from_zero(rng, (3, 4))
    out.append(_check("l1_loss", lambda a: ad.l1_loss(a[0], a[1]), [p, t]))

    p, t = D(rng.normal(size=(3, 4)), True), D(np.zeros((3, 4)), True)
    d = _away_from_zero(rng, (3, 4)) * 1.5
    d = np.where(np.abs(np.abs(d) - 1.0) < 0.05, d * 1.2, d)
    t.value = p.value + d
    out.append(_check("smooth_l1_loss", lambda a: ad.smooth_l1_loss(a[0], a[1]), [p, t]))

    x, y = D(rng.normal(size=(2, 3, 4)), True), D(rng.normal(size=(2, 3, 4)), True)
    wt = rng.normal(size=(4, 3, 2))
    key = (np.array([0, 1, 1, 0]), np.array([2, 0, 2, 2]))
    wk = rng.normal(size=(4, 4))

    def shape_ops(a):
        s = ad.add(ad.mul(a[0], a[1]), ad.scale(a[0], 0.5))
        r = ad.transpose(ad.reshape(s, (2, 3, 4)), (2, 1, 0))
        return ad.add(_weighted(r, wt), _weighted(ad.index(s, key), wk))

    out.append(_check("add/scale/mul/reshape/transpose/index/total", shape_ops, [x, y]))
    return out


def micro_network_check(seed=0):
    """End-to-end check of both detector losses through a tiny float64 network."""
    from .detector import GraspDetector, NetworkConfig, loss_gcr, loss_gpn, loss_total, sample_indices
    from .encoding import AnchorConfig
    from .geometry import GraspRect

    cfg = NetworkConfig(input_size=48, widths=(2, 3, 3), head_width=4, fc_width=5, pool_size=2, R=5,
                        anchors=AnchorConfig(scales=(1, 2), ratios=(0.5, 1.0)))
    model = GraspDetector(cfg, seed=seed, dtype=np.float64)
    rng = np.random.default_rng(seed)
    img = rng.integers(0, 256, size=(48, 48, 3)).astype(np.uint8)
    gts = [GraspRect(20.0, 22.0, 35.0, 18.0, 12.0), GraspRect(30.0, 28.0, 120.0, 14.0, 10.0)]
    # scale small head weights up so every term carries signal
    for name in ("gpn.cls.w", "gpn.reg.w", "head.cls.w", "head.reg.w"):
        model.params[name].value = rng.normal(0.0, 0.5, size=model.params[name].shape)

    x = model.input_tensor(img)
    gt_t = model.gpn_targets(gts)
    a_sample = sample_indices(gt_t.positives, gt_t.negatives, 16, 0.5, rng)
    rois = np.array([[20.0, 22.0, 20.0, 16.0], [31.0, 27.0, 14.0, 12.0], [10.0, 10.0, 16.0, 16.0],
                     [36.0, 12.0, 20.0, 18.0]])
    ht = model.head_targets(rois, gts)

    def fn(params):
        # params are the model's own leaves, perturbed in place by the checker
        feat = model.backbone(x)
        l1 = loss_gpn(model.gpn(feat), gt_t, 1.0, a_sample)
        l2 = loss_gcr(model.head(feat, rois), ht, 1.0)
        return loss_total(l1.total, l2.total)

    return CheckResult("micro_network", ad.gradient_check(fn, list(model.params.values())), NETWORK_TOL)


def run_all(seed=0):
    return kernel_checks(seed) + [micro_network_check(seed)]


def format_table(results):
    lines = [f"{'kernel':<46} {'max_rel_error':>14} {'tol':>8}  status"]
    for r in results:
        lines.append(f"{r.name:<46} {r.error:>14.3e} {r.tol:>8.0e}  {'ok' if r.ok else 'FAIL'}")
    return "\n".join(lines) + "\n"
