import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import corners, raster_jaccard
from multigrasp.errors import InvalidRect, NonRectangular
from multigrasp.geometry import (AxisAlignedBox, GraspRect, angle_difference, box_iou_matrix, center_to_corners,
                                 corners_to_center, is_correct, jaccard_batch, jaccard_index, nms, polygon_area,
                                 polygon_to_rect, rect_to_polygon, reset_to_axis_aligned)

coord = st.floats(-200, 200, allow_nan=False)
side = st.floats(0.5, 80, allow_nan=False)
angle = st.floats(0, 179.999, allow_nan=False)
rects = st.builds(GraspRect, coord, coord, angle, side, side)


def test_rect_validation():
    with pytest.raises(InvalidRect):
        GraspRect(0, 0, 0, 0, 1)
    with pytest.raises(InvalidRect):
        GraspRect(0, 0, 0, 1, -2)
    with pytest.raises(InvalidRect):
        GraspRect(float("nan"), 0, 0, 1, 1)
    with pytest.raises(InvalidRect):
        AxisAlignedBox(0, 0, 0, 1)


def test_theta_normalized_to_half_open_range():
    assert GraspRect(0, 0, -10, 1, 1).theta == pytest.approx(170)
    assert GraspRect(0, 0, 180, 1, 1).theta == 0.0
    assert GraspRect(0, 0, 370, 1, 1).theta == pytest.approx(10)
    assert GraspRect(0, 0, -1e-17, 1, 1).theta == 0.0


def test_polygon_layout():
    r = GraspRect(10, 20, 90, 6, 2)
    p = rect_to_polygon(r)
    # plate edge v1->v2 points along +y for theta = 90
    assert np.allclose(p[1] - p[0], [0, 6])
    assert np.allclose(np.linalg.norm(p[2] - p[1]), 2)
    assert polygon_area(p) == pytest.approx(12)
    assert np.allclose(p, corners(10, 20, 90, 6, 2))


@given(rects)
def test_polygon_roundtrip(r):
    back = polygon_to_rect(rect_to_polygon(r))
    assert back.x == pytest.approx(r.x, abs=1e-9)
    assert back.y == pytest.approx(r.y, abs=1e-9)
    assert back.w == pytest.approx(r.w, rel=1e-9)
    assert back.h == pytest.approx(r.h, rel=1e-9)
    assert angle_difference(back.theta, r.theta) < 1e-7


def test_polygon_to_rect_rejects_non_rectangles():
    with pytest.raises(NonRectangular):
        polygon_to_rect([[0, 0], [4, 0], [3, 2], [1, 2]])
    with pytest.raises(NonRectangular):
        polygon_to_rect([[0, 0], [0, 0], [1, 1], [0, 1]])
    with pytest.raises(NonRectangular):
        polygon_to_rect([[0, 0], [1, 0], [1, 1]])


def test_polygon_to_rect_tolerance():
    poly = [[0, 0], [10, 0], [10, 5], [0, 5.2]]
    with pytest.raises(NonRectangular):
        polygon_to_rect(poly)
    r = polygon_to_rect(poly, rtol=0.05)
    assert r.w == pytest.approx(10)


def test_jaccard_identity_and_disjoint():
    a = GraspRect(5, 5, 33, 10, 4)
    assert jaccard_index(a, a) == pytest.approx(1.0, abs=1e-12)
    assert jaccard_index(a, GraspRect(100, 100, 33, 10, 4)) == 0.0


def test_jaccard_axis_aligned_by_hand():
    # 2x2 squares overlapping by half: 2 / (4 + 4 - 2)
    assert jaccard_index(GraspRect(0, 0, 0, 2, 2), GraspRect(1, 0, 0, 2, 2)) == pytest.approx(1 / 3)
    # square rotated 45 degrees inside its own circumscribing square
    s = math.sqrt(2)
    assert jaccard_index(GraspRect(0, 0, 45, s, s), GraspRect(0, 0, 0, 2, 2)) == pytest.approx(0.5)


def test_jaccard_touching_edges_is_zero():
    assert jaccard_index(GraspRect(0, 0, 0, 2, 2), GraspRect(2, 0, 0, 2, 2)) == 0.0


@settings(max_examples=200)
@given(rects, rects)
def test_jaccard_symmetric_and_bounded(a, b):
    ab, ba = jaccard_index(a, b), jaccard_index(b, a)
    assert ab == ba
    assert 0.0 <= ab <= 1.0 + 1e-12


@given(rects, coord, coord)
def test_jaccard_translation_invariant(a, dx, dy):
    b = GraspRect(a.x + 3, a.y - 2, a.theta + 20, a.w * 0.8, a.h * 1.1)
    j0 = jaccard_index(a, b)
    j1 = jaccard_index(GraspRect(a.x + dx, a.y + dy, a.theta, a.w, a.h),
                       GraspRect(b.x + dx, b.y + dy, b.theta, b.w, b.h))
    assert j1 == pytest.approx(j0, abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(rects, rects)
def test_jaccard_matches_raster_oracle(a, b):
    b = GraspRect(a.x + (b.x % 20) - 10, a.y + (b.y % 20) - 10, b.theta, b.w, b.h)
    assert jaccard_index(a, b) == pytest.approx(raster_jaccard(a.as_tuple(), b.as_tuple()), abs=5e-3)


def test_jaccard_batch_shapes():
    a = np.array([[0, 0, 0, 2, 2], [0, 0, 0, 2, 2]], dtype=float)
    b = np.array([[1, 0, 0, 2, 2]], dtype=float)
    assert jaccard_batch(a, b) == pytest.approx([1 / 3, 1 / 3])


def test_angle_difference():
    assert angle_difference(0, 179) == pytest.approx(1)
    assert angle_difference(10, 100) == pytest.approx(90)
    assert angle_difference(170, 10) == pytest.approx(20)


@given(angle, angle)
def test_angle_difference_properties(a, b):
    d = angle_difference(a, b)
    assert 0 <= d <= 90
    assert d == angle_difference(b, a)


def test_is_correct_boundaries():
    gt = GraspRect(0, 0, 0, 4, 1)
    inner = GraspRect(0, 0, 0, 1, 1)  # Jaccard exactly 1/4
    assert jaccard_index(inner, gt) == 0.25
    assert not is_correct(inner, gt)
    assert is_correct(GraspRect(0, 0, 0, 1.01, 1), gt)
    same = GraspRect(0, 0, 0, 4, 1)
    assert is_correct(same, gt)
    tilted = GraspRect(0, 0, 30, 1, 1)
    wide = GraspRect(0, 0, 0, 1.5, 1.5)
    assert angle_difference(tilted.theta, wide.theta) == 30
    assert is_correct(tilted, wide)  # 30 degrees is inclusive
    assert not is_correct(GraspRect(0, 0, 30.001, 1, 1), wide)
    # the angle test wraps around 180
    assert is_correct(GraspRect(0, 0, 175, 4, 1), GraspRect(0, 0, 5, 4, 1))


def test_reset_and_box_conversions():
    b = reset_to_axis_aligned(GraspRect(3, 4, 60, 10, 2))
    assert (b.cx, b.cy, b.bw, b.bh) == (3, 4, 10, 2)
    assert b.corners() == (-2, 3, 8, 5)
    assert AxisAlignedBox.from_corners(*b.corners()) == b
    c = np.array([[3.0, 4, 10, 2]])
    assert np.allclose(corners_to_center(center_to_corners(c)), c)


def test_box_iou_matrix():
    a = np.array([[0, 0, 2, 2], [0, 0, 1, 1]], dtype=float)
    b = np.array([[1, 0, 3, 2], [5, 5, 6, 6]], dtype=float)
    iou = box_iou_matrix(a, b)
    assert iou.shape == (2, 2)
    assert iou[0, 0] == pytest.approx(1 / 3)
    assert iou[0, 1] == 0 and iou[1, 0] == 0


def test_nms_keeps_best_of_overlapping():
    boxes = np.array([[0, 0, 10, 10], [0.5, 0, 10.5, 10], [20, 20, 30, 30]], dtype=float)
    keep = nms(boxes, np.array([0.5, 0.9, 0.1]), 0.5)
    assert keep.tolist() == [1, 2]
    assert nms(np.zeros((0, 4)), np.zeros(0), 0.5).size == 0
    # identical boxes: one survives
    assert nms(np.array([[0, 0, 4, 4]] * 3, dtype=float), np.array([0.2, 0.2, 0.2]), 0.5).tolist() == [0]
