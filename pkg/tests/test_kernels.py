"""Both kernel backends must agree; each is also checked against plain definitions."""
import os
import subprocess
import sys

import numpy as np
import pytest

from _oracles import raster_jaccard, random_rect_pair
from multigrasp import kernels
from multigrasp.kernels import get_backend

NUMBA, NUMPY = get_backend("numba"), get_backend("numpy")


def both(name, *args):
    return getattr(NUMBA, name)(*args), getattr(NUMPY, name)(*args)


def test_unknown_backend():
    with pytest.raises(ValueError):
        get_backend("cuda")


@pytest.mark.parametrize("value,expected", [("numpy", "numpy"), ("numba", "numba"), ("NumPy", "numpy")])
def test_env_flag_selects_backend(value, expected):
    env = dict(os.environ, **{kernels.ENV_FLAG: value})
    out = subprocess.run([sys.executable, "-c", "import multigrasp.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected


def test_col2im_agrees(rng):
    n, c, h, w, k, stride, pad = 2, 3, 7, 6, 3, 2, 1
    oh, ow = (h + 2 * pad - k) // stride + 1, (w + 2 * pad - k) // stride + 1
    d = rng.normal(size=(n, oh, ow, c, k, k))
    a, b = both("col2im", d, n, c, h, w, k, k, stride, pad)
    assert a.shape == (n, c, h, w)
    assert np.allclose(a, b)
    # total mass is preserved minus what lands in the padding
    ref = np.zeros((n, c, h + 2 * pad, w + 2 * pad))
    for i in range(oh):
        for j in range(ow):
            ref[:, :, i * stride:i * stride + k, j * stride:j * stride + k] += d[:, i, j]
    assert np.allclose(a, ref[:, :, pad:pad + h, pad:pad + w])


def test_maxpool_agrees(rng):
    x = rng.normal(size=(2, 3, 7, 6))
    (oa, ia), (ob, ib) = both("maxpool2_forward", x)
    assert oa.shape == (2, 3, 3, 3)
    assert np.array_equal(oa, ob) and np.array_equal(ia, ib)
    assert np.array_equal(oa, x[:, :, :6, :6].reshape(2, 3, 3, 2, 3, 2).max(axis=(3, 5)))
    g = rng.normal(size=oa.shape)
    ga, gb = both("maxpool2_backward", g, ia, 7, 6)
    assert np.array_equal(ga, gb)
    assert ga.sum() == pytest.approx(g.sum())
    assert np.all(ga[:, :, 6, :] == 0)


def test_roi_pool_agrees(rng):
    feat = rng.normal(size=(4, 9, 11))
    rois = np.array([[0, 0, 175, 143], [30, 20, 60, 90], [100.4, 100.6, 101, 101], [-20, -10, 400, 300]])
    (oa, aa), (ob, ab) = both("roi_pool_forward", feat, rois, 3, 2, 1 / 16)
    assert np.array_equal(oa, ob) and np.array_equal(aa, ab)
    flat = feat.reshape(4, -1)
    assert np.array_equal(np.take_along_axis(flat, aa.reshape(4, 4, -1).transpose(1, 0, 2).reshape(4, -1), 1)
                          .reshape(4, 4, 3, 2).transpose(1, 0, 2, 3), oa)
    g = rng.normal(size=oa.shape)
    ga, gb = both("roi_pool_backward", g, aa, 9, 11)
    assert np.allclose(ga, gb)
    assert ga.sum() == pytest.approx(g.sum())


def test_roi_pool_whole_map_single_bin_is_global_max(rng):
    feat = rng.normal(size=(2, 5, 5))
    for k in (NUMBA, NUMPY):
        out, _ = k.roi_pool_forward(feat, np.array([[0.0, 0, 79, 79]]), 1, 1, 1 / 16)
        assert np.array_equal(out[0, :, 0, 0], feat.reshape(2, -1).max(axis=1))


def test_roi_pool_constant_map():
    feat = np.full((1, 6, 6), 2.5)
    for k in (NUMBA, NUMPY):
        out, arg = k.roi_pool_forward(feat, np.array([[10.0, 10, 60, 40]]), 4, 4, 1 / 16)
        assert np.all(out == 2.5)
        g = np.ones_like(out)
        assert k.roi_pool_backward(g, arg, 6, 6).sum() == g.sum()


def test_warp_agrees(rng):
    img = rng.uniform(0, 255, size=(20, 30, 3))
    minv = np.array([[0.8, -0.3, 4.0], [0.3, 0.8, -2.0], [0, 0, 1.0]])
    a, b = both("warp_bilinear", img, minv, 25, 17)
    assert np.allclose(a, b)
    ident, _ = both("warp_bilinear", img, np.eye(3), 20, 30)
    assert np.allclose(ident, img)


def test_nms_agrees(rng):
    x = rng.uniform(0, 50, size=(80, 2))
    boxes = np.hstack([x, x + rng.uniform(5, 20, size=(80, 2))])
    order = rng.permutation(80).astype(np.int64)
    for t in (0.0, 0.3, 0.7, 1.0):
        a, b = both("nms", boxes, order, t)
        assert np.array_equal(a, b)


def test_rect_jaccard_agrees_with_oracle(rng):
    pairs = [random_rect_pair(rng) for _ in range(100)]
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    ja, jb = both("rect_jaccard_batch", a, b)
    assert np.allclose(ja, jb, atol=1e-12)
    oracle = np.array([raster_jaccard(p, q) for p, q in pairs])
    assert np.max(np.abs(ja - oracle)) < 5e-3
