"""Vectorized numpy kernels (the no-numba fallback)."""
import numpy as np

from . import _loops

NAME = "numpy"


def col2im(dcols, n, c, h, w, kh, kw, stride, pad):
    _, oh, ow = dcols.shape[:3]
    dxp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=dcols.dtype)
    d = dcols.transpose(0, 3, 1, 2, 4, 5)
    ys = stride * (oh - 1) + 1
    xs = stride * (ow - 1) + 1
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i:i + ys:stride, j:j + xs:stride] += d[..., i, j]
    return dxp[:, :, pad:pad + h, pad:pad + w].copy()


def _blocks(x):
    n, c, h, w = x.shape
    oh, ow = h // 2, w // 2
    xb = x[:, :, :2 * oh, :2 * ow].reshape(n, c, oh, 2, ow, 2)
    return xb.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, oh, ow, 4)


def maxpool2_forward(x):
    xb = _blocks(x)
    idx = xb.argmax(axis=-1)
    out = np.take_along_axis(xb, idx[..., None], axis=-1)[..., 0]
    return out, idx.astype(np.int64)


def maxpool2_backward(dout, idx, h, w):
    n, c, oh, ow = dout.shape
    d4 = np.zeros((n, c, oh, ow, 4), dtype=dout.dtype)
    np.put_along_axis(d4, idx[..., None], dout[..., None], axis=-1)
    d4 = d4.reshape(n, c, oh, ow, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    dx = np.zeros((n, c, h, w), dtype=dout.dtype)
    dx[:, :, :2 * oh, :2 * ow] = d4.reshape(n, c, 2 * oh, 2 * ow)
    return dx


def roi_pool_forward(feat, rois, ph, pw, scale):
    c, h, w = feat.shape
    r = rois.shape[0]
    out = np.empty((r, c, ph, pw), dtype=feat.dtype)
    arg = np.empty((r, c, ph, pw), dtype=np.int64)
    q = np.floor(rois * scale + 0.5).astype(np.int64)
    for i in range(r):
        x0, y0, x1, y1 = (int(v) for v in q[i])
        bh = max(y1 - y0 + 1, 1) / ph
        bw = max(x1 - x0 + 1, 1) / pw
        wbins = [_loops._bin(px, bw, x0, w) for px in range(pw)]
        for py in range(ph):
            hs, he = _loops._bin(py, bh, y0, h)
            for px, (ws, we) in enumerate(wbins):
                region = feat[:, hs:he, ws:we].reshape(c, -1)
                a = region.argmax(axis=1)
                out[i, :, py, px] = region[np.arange(c), a]
                ncols = we - ws
                arg[i, :, py, px] = (hs + a // ncols) * w + ws + a % ncols
    return out, arg


def roi_pool_backward(dout, arg, h, w):
    r, c, ph, pw = dout.shape
    df = np.zeros((c, h * w), dtype=dout.dtype)
    chan = np.broadcast_to(np.arange(c)[None, :, None, None], arg.shape)
    np.add.at(df, (chan.ravel(), arg.ravel()), dout.ravel())
    return df.reshape(c, h, w)


def warp_bilinear(img, minv, oh, ow):
    h, w, c = img.shape
    v, u = np.mgrid[0:oh, 0:ow].astype(np.float64)
    sx = minv[0, 0] * u + minv[0, 1] * v + minv[0, 2]
    sy = minv[1, 0] * u + minv[1, 1] * v + minv[1, 2]
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = sx - x0
    fy = sy - y0
    out = np.zeros((oh, ow, c), dtype=np.float64)
    for dy in (0, 1):
        yy = y0 + dy
        wy = fy if dy == 1 else 1.0 - fy
        for dx in (0, 1):
            xx = x0 + dx
            wx = fx if dx == 1 else 1.0 - fx
            ok = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w) & (wy != 0.0) & (wx != 0.0)
            if not ok.any():
                continue
            wt = np.where(ok, wy * wx, 0.0)
            vals = img[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)]
            out += wt[..., None] * np.where(ok[..., None], vals, 0.0)
    return out


def nms(boxes, order, thresh):
    order = np.asarray(order, dtype=np.int64)
    x1, y1, x2, y2 = boxes[:, 0], boxes[:, 1], boxes[:, 2], boxes[:, 3]
    area = (x2 - x1) * (y2 - y1)
    keep = []
    while order.size:
        i = order[0]
        keep.append(i)
        rest = order[1:]
        iw = np.minimum(x2[i], x2[rest]) - np.maximum(x1[i], x1[rest])
        ih = np.minimum(y2[i], y2[rest]) - np.maximum(y1[i], y1[rest])
        inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
        iou = inter / (area[i] + area[rest] - inter)
        order = rest[~(iou > thresh)]
    return np.asarray(keep, dtype=np.int64)


def rect_jaccard_batch(a, b):
    return _loops.rect_jaccard_batch(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))
