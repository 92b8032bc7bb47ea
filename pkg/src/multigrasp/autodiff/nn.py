"""Network kernels: convolution, pooling, fully connected, losses."""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .. import kernels
from ..errors import LabelOutOfRange, ShapeMismatch
from .core import DiffArray, _node


def conv2d(x, w, b=None, stride=1, pad=0):
    """Cross-correlation of NCHW ``x`` with OIHW ``w``."""
    if x.value.ndim != 4 or w.value.ndim != 4:
        raise ShapeMismatch(f"conv2d wants 4-d input and kernel, got {x.shape}, {w.shape}")
    n, c, h, wd = x.shape
    o, ci, kh, kw = w.shape
    if ci != c:
        raise ShapeMismatch(f"input has {c} channels, kernel expects {ci}")
    if b is not None and b.shape != (o,):
        raise ShapeMismatch(f"bias shape {b.shape}, expected ({o},)")
    if stride < 1 or pad < 0 or h + 2 * pad < kh or wd + 2 * pad < kw:
        raise ShapeMismatch(f"kernel {kh}x{kw} does not fit input {h}x{wd} with pad {pad}")
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    xp = np.pad(x.value, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.value
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :oh, :ow]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * kh * kw)
    wmat = w.value.reshape(o, -1)
    out = cols @ wmat.T
    if b is not None:
        out += b.value
    out = np.ascontiguousarray(out.reshape(n, oh, ow, o).transpose(0, 3, 1, 2))

    def back(g):
        dmat = g.transpose(0, 2, 3, 1).reshape(-1, o)
        if w.requires_grad:
            w.accumulate((dmat.T @ cols).reshape(w.shape))
        if b is not None and b.requires_grad:
            b.accumulate(dmat.sum(axis=0))
        if x.requires_grad:
            dcols = np.ascontiguousarray((dmat @ wmat).reshape(n, oh, ow, c, kh, kw))
            x.accumulate(kernels.col2im(dcols, n, c, h, wd, kh, kw, stride, pad))

    parents = (x, w) if b is None else (x, w, b)
    return _node(out, parents, back, "conv2d")


def relu(x):
    mask = x.value > 0

    def back(g):
        x.accumulate(g * mask)

    return _node(x.value * mask, (x,), back, "relu")


def max_pool2d(x):
    """2x2 max pooling with stride 2; odd trailing rows/columns are dropped."""
    if x.value.ndim != 4 or x.shape[2] < 2 or x.shape[3] < 2:
        raise ShapeMismatch(f"max_pool2d wants NCHW with H, W >= 2, got {x.shape}")
    out, idx = kernels.maxpool2_forward(np.ascontiguousarray(x.value))
    h, w = x.shape[2], x.shape[3]

    def back(g):
        x.accumulate(kernels.maxpool2_backward(np.ascontiguousarray(g), idx, h, w))

    return _node(out, (x,), back, "max_pool2d")


def global_avg_pool(x):
    if x.value.ndim != 4:
        raise ShapeMismatch(f"global_avg_pool wants NCHW, got {x.shape}")
    hw = x.shape[2] * x.shape[3]

    def back(g):
        x.accumulate(np.broadcast_to(g[:, :, None, None] / hw, x.shape).copy())

    return _node(x.value.mean(axis=(2, 3)), (x,), back, "global_avg_pool")


def affine(x, w, b=None):
    """Fully connected layer: (N, in) @ (out, in).T + (out,)."""
    if x.value.ndim != 2 or w.value.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ShapeMismatch(f"affine input {x.shape} vs weight {w.shape}")
    if b is not None and b.shape != (w.shape[0],):
        raise ShapeMismatch(f"bias shape {b.shape}, expected ({w.shape[0]},)")
    out = x.value @ w.value.T
    if b is not None:
        out = out + b.value

    def back(g):
        if w.requires_grad:
            w.accumulate(g.T @ x.value)
        if b is not None and b.requires_grad:
            b.accumulate(g.sum(axis=0))
        if x.requires_grad:
            x.accumulate(g @ w.value)

    parents = (x, w) if b is None else (x, w, b)
    return _node(out, parents, back, "affine")


def roi_pool(feat, rois, out_size=(7, 7), spatial_scale=1.0 / 16):
    """Max-pool each ROI of a single-image NCHW map onto an ``out_size`` grid.

    ``rois`` is an (R, 4) array of image-space corners (x1, y1, x2, y2).
    Bins that quantize to nothing take the nearest feature cell.
    """
    if feat.value.ndim != 4 or feat.shape[0] != 1:
        raise ShapeMismatch(f"roi_pool wants a (1, C, H, W) map, got {feat.shape}")
    rois = np.ascontiguousarray(rois, dtype=np.float64).reshape(-1, 4)
    ph, pw = out_size
    _, c, h, w = feat.shape
    out, arg = kernels.roi_pool_forward(np.ascontiguousarray(feat.value[0]), rois, ph, pw, float(spatial_scale))

    def back(g):
        feat.accumulate(kernels.roi_pool_backward(np.ascontiguousarray(g), arg, h, w)[None])

    return _node(out, (feat,), back, "roi_pool")


def log_softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(z):
    return np.exp(log_softmax(np.asarray(z)))


def softmax_cross_entropy(logits, labels):
    """Mean of -log softmax(logits)[label] over rows; 1-d logits take a scalar label."""
    single = logits.value.ndim == 1
    z = logits.value[None] if single else logits.value
    lab = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if z.ndim != 2 or len(lab) != z.shape[0]:
        raise ShapeMismatch(f"logits {logits.shape} vs labels {lab.shape}")
    if np.any(lab < 0) or np.any(lab >= z.shape[1]):
        raise LabelOutOfRange(f"labels must lie in [0, {z.shape[1]})")
    n = z.shape[0]
    lsm = log_softmax(z)
    rows = np.arange(n)
    loss = -lsm[rows, lab].sum() / n

    def back(g):
        d = np.exp(lsm)
        d[rows, lab] -= 1.0
        d *= g / n
        logits.accumulate(d[0] if single else d)

    return _node(np.asarray(loss, dtype=logits.dtype), (logits,), back, "softmax_cross_entropy")


def _target(pred, target):
    t = target if isinstance(target, DiffArray) else DiffArray(np.asarray(target, dtype=pred.dtype))
    if t.shape != pred.shape:
        raise ShapeMismatch(f"prediction {pred.shape} vs target {t.shape}")
    return t


def l1_loss(pred, target):
    """Mean absolute error; the subgradient at an exact zero is 0."""
    t = _target(pred, target)
    diff = pred.value - t.value
    n = diff.size

    def back(g):
        s = np.sign(diff) * (g / n)
        pred.accumulate(s)
        t.accumulate(-s)

    return _node(np.asarray(np.abs(diff).sum() / n, dtype=pred.dtype), (pred, t), back, "l1_loss")


def smooth_l1_loss(pred, target, beta=1.0):
    t = _target(pred, target)
    diff = pred.value - t.value
    ad = np.abs(diff)
    n = diff.size
    small = ad < beta
    val = np.where(small, 0.5 * diff * diff / beta, ad - 0.5 * beta)

    def back(g):
        s = np.where(small, diff / beta, np.sign(diff)) * (g / n)
        pred.accumulate(s)
        t.accumulate(-s)

    return _node(np.asarray(val.sum() / n, dtype=pred.dtype), (pred, t), back, "smooth_l1_loss")
