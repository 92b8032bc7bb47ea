"""Loop-form kernels.

Written in the numba nopython subset. ``_numba`` compiles them; the numpy
backend reuses only the ones it has no vectorized form for (polygon
clipping), running them as plain Python.
"""
import math

import numpy as np

_MAXV = 16


def col2im(dcols, n_, c_, h, w, kh, kw, stride, pad):
    n, oh, ow = dcols.shape[0], dcols.shape[1], dcols.shape[2]
    dxp = np.zeros((n_, c_, h + 2 * pad, w + 2 * pad), dtype=dcols.dtype)
    for b in range(n):
        for y in range(oh):
            for x in range(ow):
                for c in range(c_):
                    for i in range(kh):
                        for j in range(kw):
                            dxp[b, c, y * stride + i, x * stride + j] += dcols[b, y, x, c, i, j]
    return dxp[:, :, pad:pad + h, pad:pad + w].copy()


def maxpool2_forward(x):
    n, c, h, w = x.shape
    oh, ow = h // 2, w // 2
    out = np.empty((n, c, oh, ow), dtype=x.dtype)
    idx = np.empty((n, c, oh, ow), dtype=np.int64)
    for b in range(n):
        for k in range(c):
            for y in range(oh):
                for z in range(ow):
                    best = x[b, k, 2 * y, 2 * z]
                    arg = 0
                    for q in range(1, 4):
                        v = x[b, k, 2 * y + q // 2, 2 * z + q % 2]
                        if v > best:
                            best = v
                            arg = q
                    out[b, k, y, z] = best
                    idx[b, k, y, z] = arg
    return out, idx


def maxpool2_backward(dout, idx, h, w):
    n, c, oh, ow = dout.shape
    dx = np.zeros((n, c, h, w), dtype=dout.dtype)
    for b in range(n):
        for k in range(c):
            for y in range(oh):
                for z in range(ow):
                    q = idx[b, k, y, z]
                    dx[b, k, 2 * y + q // 2, 2 * z + q % 2] += dout[b, k, y, z]
    return dx


def _bin(p, bin_size, start, limit):
    lo = int(math.floor(p * bin_size)) + start
    hi = int(math.ceil((p + 1) * bin_size)) + start
    lo = min(max(lo, 0), limit)
    hi = min(max(hi, 0), limit)
    if hi <= lo:
        lo = min(max(lo, 0), limit - 1)
        hi = lo + 1
    return lo, hi


def roi_pool_forward(feat, rois, ph, pw, scale):
    c, h, w = feat.shape
    r = rois.shape[0]
    out = np.empty((r, c, ph, pw), dtype=feat.dtype)
    arg = np.empty((r, c, ph, pw), dtype=np.int64)
    for i in range(r):
        x0 = int(math.floor(rois[i, 0] * scale + 0.5))
        y0 = int(math.floor(rois[i, 1] * scale + 0.5))
        x1 = int(math.floor(rois[i, 2] * scale + 0.5))
        y1 = int(math.floor(rois[i, 3] * scale + 0.5))
        bh = max(y1 - y0 + 1, 1) / ph
        bw = max(x1 - x0 + 1, 1) / pw
        for py in range(ph):
            hs, he = _bin(py, bh, y0, h)
            for px in range(pw):
                ws, we = _bin(px, bw, x0, w)
                for k in range(c):
                    best = feat[k, hs, ws]
                    best_i = hs * w + ws
                    for yy in range(hs, he):
                        for xx in range(ws, we):
                            v = feat[k, yy, xx]
                            if v > best:
                                best = v
                                best_i = yy * w + xx
                    out[i, k, py, px] = best
                    arg[i, k, py, px] = best_i
    return out, arg


def roi_pool_backward(dout, arg, h, w):
    r, c, ph, pw = dout.shape
    df = np.zeros((c, h * w), dtype=dout.dtype)
    for i in range(r):
        for k in range(c):
            for py in range(ph):
                for px in range(pw):
                    df[k, arg[i, k, py, px]] += dout[i, k, py, px]
    return df.reshape((c, h, w))


def warp_bilinear(img, minv, oh, ow):
    h, w, c = img.shape
    out = np.zeros((oh, ow, c), dtype=np.float64)
    for v in range(oh):
        for u in range(ow):
            sx = minv[0, 0] * u + minv[0, 1] * v + minv[0, 2]
            sy = minv[1, 0] * u + minv[1, 1] * v + minv[1, 2]
            x0 = int(math.floor(sx))
            y0 = int(math.floor(sy))
            fx = sx - x0
            fy = sy - y0
            for dy in range(2):
                yy = y0 + dy
                if yy < 0 or yy >= h:
                    continue
                wy = fy if dy == 1 else 1.0 - fy
                if wy == 0.0:
                    continue
                for dx in range(2):
                    xx = x0 + dx
                    if xx < 0 or xx >= w:
                        continue
                    wx = fx if dx == 1 else 1.0 - fx
                    if wx == 0.0:
                        continue
                    for k in range(c):
                        out[v, u, k] += wy * wx * img[yy, xx, k]
    return out


def nms(boxes, order, thresh):
    n = order.shape[0]
    suppressed = np.zeros(n, dtype=np.bool_)
    keep = np.empty(n, dtype=np.int64)
    nk = 0
    for a in range(n):
        if suppressed[a]:
            continue
        i = order[a]
        keep[nk] = i
        nk += 1
        ai = (boxes[i, 2] - boxes[i, 0]) * (boxes[i, 3] - boxes[i, 1])
        for b in range(a + 1, n):
            if suppressed[b]:
                continue
            j = order[b]
            iw = min(boxes[i, 2], boxes[j, 2]) - max(boxes[i, 0], boxes[j, 0])
            ih = min(boxes[i, 3], boxes[j, 3]) - max(boxes[i, 1], boxes[j, 1])
            if iw <= 0.0 or ih <= 0.0:
                continue
            inter = iw * ih
            aj = (boxes[j, 2] - boxes[j, 0]) * (boxes[j, 3] - boxes[j, 1])
            if inter / (ai + aj - inter) > thresh:
                suppressed[b] = True
    return keep[:nk].copy()


def _corners(r, out):
    t = math.radians(r[2])
    ux, uy = math.cos(t), math.sin(t)
    nx, ny = -uy, ux
    hw, hh = 0.5 * r[3], 0.5 * r[4]
    out[0, 0] = r[0] - hw * ux - hh * nx
    out[0, 1] = r[1] - hw * uy - hh * ny
    out[1, 0] = r[0] + hw * ux - hh * nx
    out[1, 1] = r[1] + hw * uy - hh * ny
    out[2, 0] = r[0] + hw * ux + hh * nx
    out[2, 1] = r[1] + hw * uy + hh * ny
    out[3, 0] = r[0] - hw * ux + hh * nx
    out[3, 1] = r[1] - hw * uy + hh * ny


def _shoelace(poly, n):
    s = 0.0
    for i in range(n):
        j = (i + 1) % n
        s += poly[i, 0] * poly[j, 1] - poly[j, 0] * poly[i, 1]
    return 0.5 * s


def clip_area(subject, ns, clip, nc):
    """Area of convex ``subject`` clipped by convex CCW ``clip``."""
    cur = np.empty((_MAXV, 2))
    nxt = np.empty((_MAXV, 2))
    for i in range(ns):
        cur[i, 0] = subject[i, 0]
        cur[i, 1] = subject[i, 1]
    n = ns
    for e in range(nc):
        if n == 0:
            break
        ax, ay = clip[e, 0], clip[e, 1]
        bx, by = clip[(e + 1) % nc, 0], clip[(e + 1) % nc, 1]
        ex, ey = bx - ax, by - ay
        m = 0
        for i in range(n):
            px, py = cur[i, 0], cur[i, 1]
            qx, qy = cur[(i + 1) % n, 0], cur[(i + 1) % n, 1]
            sp = ex * (py - ay) - ey * (px - ax)
            sq = ex * (qy - ay) - ey * (qx - ax)
            if sp >= 0.0:
                nxt[m, 0] = px
                nxt[m, 1] = py
                m += 1
            if (sp >= 0.0) != (sq >= 0.0):
                t = sp / (sp - sq)
                nxt[m, 0] = px + t * (qx - px)
                nxt[m, 1] = py + t * (qy - py)
                m += 1
        for i in range(m):
            cur[i, 0] = nxt[i, 0]
            cur[i, 1] = nxt[i, 1]
        n = m
    if n < 3:
        return 0.0
    area = _shoelace(cur, n)
    if area < 1e-12:
        return 0.0
    return area


def rect_jaccard(a, b):
    pa = np.empty((4, 2))
    pb = np.empty((4, 2))
    _corners(a, pa)
    _corners(b, pb)
    inter = clip_area(pa, 4, pb, 4)
    if inter == 0.0:
        return 0.0
    union = a[3] * a[4] + b[3] * b[4] - inter
    j = inter / union
    return min(max(j, 0.0), 1.0)


def rect_jaccard_batch(a, b):
    n = a.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = rect_jaccard(a[i], b[i])
    return out
