import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from multigrasp.encoding import (DELTA_CLAMP, IGNORE, NEGATIVE, POSITIVE, AnchorConfig, AngleCodec, base_shapes,
                                 class_to_angle, clip_boxes, decode, decode_box, encode, encode_box,
                                 generate_anchors, label_anchors, label_rois, quantize_angle, reset_boxes)
from multigrasp.errors import ConfigError, EmptyGroundTruth, NullClassHasNoAngle
from multigrasp.geometry import AxisAlignedBox, GraspRect

W = 180 / 19


def test_codec_basics():
    c = AngleCodec()
    assert c.n_classes == 20
    assert quantize_angle(0.0) == 1
    assert quantize_angle(179.999) == 19
    assert quantize_angle(180.0) == 1
    assert quantize_angle(-1.0) == 19
    assert class_to_angle(1) == pytest.approx(W / 2)
    assert class_to_angle(19) == pytest.approx(180 - W / 2)
    with pytest.raises(NullClassHasNoAngle):
        class_to_angle(0)
    with pytest.raises(ValueError):
        class_to_angle(20)
    with pytest.raises(ConfigError):
        AngleCodec(0)


def test_bins_are_half_open():
    c = AngleCodec()
    for k, edge in enumerate(c.edges[1:], 1):
        assert edge == pytest.approx(k * 180 / 19)
        assert c.quantize(edge) == k + 1
        assert c.quantize(np.nextafter(edge, 0)) == k


@given(st.floats(0, 179.999999))
def test_quantization_error_bound(theta):
    assert abs(class_to_angle(quantize_angle(theta)) - theta) <= 90 / 19 + 1e-9


def test_vectorized_quantize():
    out = quantize_angle(np.array([0.0, 90.0, 179.0]))
    assert out.dtype == np.int64 and out.tolist() == [1, 10, 19]


def test_anchor_layout():
    cfg = AnchorConfig()
    shapes = base_shapes(cfg)
    assert np.allclose(shapes.prod(axis=1), np.repeat([16.0 ** 2, 32.0 ** 2, 64.0 ** 2], 3))
    assert np.allclose(shapes[:3, 1] / shapes[:3, 0], [0.5, 1, 2])
    a = generate_anchors(3, 2, cfg)
    assert a.shape == (3 * 2 * 9, 4)
    # ordering is (row, column, shape)
    assert np.allclose(a[0, :2], [8, 8])
    assert np.allclose(a[9, :2], [24, 8])
    assert np.allclose(a[27, :2], [8, 24])
    assert np.allclose(a[:9, 2:], shapes)
    with pytest.raises(ConfigError):
        AnchorConfig(scales=())


def test_clip_boxes():
    b = clip_boxes(np.array([[5.0, 5, 20, 20], [50, 50, 10, 10]]), 30, 30)
    assert np.allclose(b[0], [7.5, 7.5, 15, 15])
    assert np.allclose(b[1], [30, 30, 0, 0])


def test_encode_decode_by_hand():
    t = encode_box([10, 10, 4, 8], AxisAlignedBox(12, 6, 8, 8))
    assert np.allclose(t, [0.5, -0.5, math.log(2), 0])
    b = decode_box([10, 10, 4, 8], t)
    assert (b.cx, b.cy) == pytest.approx((12, 6))
    assert (b.bw, b.bh) == pytest.approx((8, 8))


@given(st.lists(st.floats(5, 200), min_size=8, max_size=8))
def test_encode_decode_roundtrip(v):
    # sizes stay within the clamp: ratio at most 40 < 1000 / 16
    a = np.array([v[:4]])
    g = np.array([v[4:]])
    assert np.allclose(decode(a, encode(a, g)), g, rtol=1e-9)


def test_decode_clamps_size():
    b = decode(np.array([[0, 0, 16, 16]]), np.array([[0, 0, 100, 100]]))
    assert np.allclose(b[0, 2:], 16 * math.exp(DELTA_CLAMP))


def test_reset_boxes():
    assert reset_boxes([]).shape == (0, 4)
    assert reset_boxes([GraspRect(1, 2, 45, 3, 4)]).tolist() == [[1, 2, 3, 4]]


def test_label_anchors():
    anchors = np.array([[10, 10, 10, 10], [11, 10, 10, 10], [40, 40, 10, 10], [14, 10, 10, 10],
                        [100, 100, 4, 4]], dtype=float)
    gt = np.array([[10, 10, 10, 10], [100, 100, 20, 20]], dtype=float)
    t = label_anchors(anchors, gt, 0.7, 0.3)
    # 0: IoU 1; 1: IoU 9/11; 2: no overlap; 3: IoU 6/14 (ignored); 4: only anchor touching gt 1
    assert t.labels.tolist() == [POSITIVE, POSITIVE, NEGATIVE, IGNORE, POSITIVE]
    assert t.matched.tolist() == [0, 0, -1, 0, 1]
    assert np.allclose(t.deltas[1], encode(anchors[1:2], gt[0:1])[0])
    assert np.allclose(t.deltas[4], encode(anchors[4:5], gt[1:2])[0])
    assert t.positives.tolist() == [0, 1, 4] and t.negatives.tolist() == [2]
    with pytest.raises(EmptyGroundTruth):
        label_anchors(anchors, np.zeros((0, 4)))


def test_label_anchors_max_iou_ties_all_positive():
    anchors = np.array([[5, 10, 10, 10], [15, 10, 10, 10]], dtype=float)
    t = label_anchors(anchors, np.array([[10, 10, 10, 10]], dtype=float))
    assert t.labels.tolist() == [POSITIVE, POSITIVE]


def test_label_rois():
    gts = [GraspRect(10, 10, 5, 10, 10), GraspRect(50, 50, 100, 10, 10)]
    rois = np.array([[10, 10, 10, 10], [51, 50, 10, 10], [30, 30, 10, 10], [14, 10, 10, 10]], dtype=float)
    t = label_rois(rois, gts, 0.5)
    assert t.labels.tolist() == [quantize_angle(5), quantize_angle(100), 0, 0]
    assert t.foreground.tolist() == [0, 1]
    assert np.allclose(t.deltas[1], [-0.1, 0, 0, 0])
    assert np.all(t.deltas[2:] == 0)
    with pytest.raises(EmptyGroundTruth):
        label_rois(rois, [])
