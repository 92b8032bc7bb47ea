import re
import xml.etree.ElementTree as ET

import numpy as np

from _oracles import corners
from multigrasp.detector import Detection
from multigrasp.geometry import GraspRect
from multigrasp.svg import GT_COLOR, PRED_COLOR, export_overlay

NS = "{http://www.w3.org/2000/svg}"


def _lines(svg):
    return ET.fromstring(svg).findall(f"{NS}line")


def test_no_detections_draws_only_gts():
    svg = export_overlay(np.zeros((30, 40, 3)), [], [GraspRect(18, 14, 0, 12, 8)])
    lines = _lines(svg)
    assert len(lines) == 4
    assert all(ln.get("stroke") == GT_COLOR for ln in lines)
    root = ET.fromstring(svg)
    assert root.get("width") == "40" and root.get("height") == "30"


def test_single_detection_has_two_stroke_styles():
    det = Detection(GraspRect(20, 15, 30, 16, 6), 0.9, 4)
    lines = _lines(export_overlay((40, 30), [det]))
    assert len(lines) == 4 and all(ln.get("stroke") == PRED_COLOR for ln in lines)
    styles = [(ln.get("stroke-width"), ln.get("stroke-dasharray")) for ln in lines]
    assert styles[0] == styles[2] == ("3", None)
    assert styles[1] == styles[3] == ("1", "4 2")
    assert len(set(styles)) == 2


def test_line_endpoints_match_rect_corners():
    r = (20.0, 15.0, 30.0, 16.0, 6.0)
    lines = _lines(export_overlay((40, 30), [GraspRect(*r)]))
    c = corners(*r)
    for i, ln in enumerate(lines):
        a, b = c[i], c[(i + 1) % 4]
        got = [float(ln.get(k)) for k in ("x1", "y1", "x2", "y2")]
        assert np.allclose(got, [a[0], a[1], b[0], b[1]], atol=1e-3)
    # the plate edges are as long as w, the opening edges as long as h
    lengths = [np.hypot(float(ln.get("x2")) - float(ln.get("x1")), float(ln.get("y2")) - float(ln.get("y1")))
               for ln in lines]
    assert np.allclose(lengths, [16, 6, 16, 6], atol=1e-2)


def test_href_background_is_escaped():
    svg = export_overlay((10, 10), href='a"b.ppm')
    img = ET.fromstring(svg).find(f"{NS}image")
    assert img.get("{http://www.w3.org/1999/xlink}href") == 'a"b.ppm'


def test_golden_file(data_dir):
    svg = export_overlay((40, 30), [Detection(GraspRect(20, 15, 30, 16, 6), 0.9, 4)], [GraspRect(18, 14, 0, 12, 8)])
    assert svg == (data_dir / "overlay_golden.svg").read_text()
    assert not re.search(r"\d\.\d*0\"", svg)
