import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gvpmon.errors import InvalidRoi, OutOfRange, ValidationError, ZeroRoiArea
from gvpmon.geometry import (
    BBox,
    Detection,
    FrameRecord,
    NormBox,
    RoiPolygon,
    clip_box,
    coverage_fraction,
    iou,
    iou_matrix,
    norm_to_pixel,
    parse_roi,
    pixel_to_norm,
    roi_mask,
    roi_to_spec,
    union_area,
)
from oracles import exact_iou, raster_area

FRAME_W, FRAME_H = 700, 395


@st.composite
def int_boxes(draw, max_size=20, frame_w=FRAME_W, frame_h=FRAME_H):
    n = draw(st.integers(0, max_size))
    out = []
    for _ in range(n):
        x = draw(st.integers(0, frame_w - 1))
        y = draw(st.integers(0, frame_h - 1))
        w = draw(st.integers(0, frame_w - x))
        h = draw(st.integers(0, frame_h - y))
        out.append((x, y, w, h))
    return out


def bboxes(raw):
    return [BBox(*b) for b in raw]


# --- types --------------------------------------------------------------------


def test_bbox_rejects_negative_size():
    with pytest.raises(ValidationError):
        BBox(0, 0, -1, 5)
    with pytest.raises(ValidationError):
        BBox(0, 0, 1, float("nan"))


def test_bbox_area_and_corners():
    b = BBox(2, 3, 4, 5)
    assert (b.x2, b.y2, b.area) == (6, 8, 20)


def test_normbox_range():
    NormBox(0.5, 0.5, 1.0, 1.0 + 5e-7)
    with pytest.raises(OutOfRange):
        NormBox(0.5, 0.5, 1.01, 0.2)


def test_detection_confidence_range():
    with pytest.raises(ValidationError):
        Detection(BBox(0, 0, 1, 1), 1.5)


def test_frame_record_holds_detections_as_tuple():
    rec = FrameRecord("20240101_000000", 0, [Detection(BBox(0, 0, 1, 1), 0.5)])
    assert isinstance(rec.detections, tuple)


def test_roi_validation():
    with pytest.raises(InvalidRoi):
        RoiPolygon(((0, 0), (10, 0)), 100, 100)
    with pytest.raises(InvalidRoi):
        RoiPolygon(((0, 0), (10, 0), (0, 10), (10, 10)), 100, 100)  # bow tie
    with pytest.raises(InvalidRoi):
        RoiPolygon(((0, 0), (200, 0), (0, 10)), 100, 100)
    with pytest.raises(ZeroRoiArea):
        RoiPolygon(((0, 0), (5, 5), (10, 10)), 100, 100)


def test_roi_spec_round_trip():
    rect = parse_roi({"rect": [50, 100, 600, 280]}, FRAME_W, FRAME_H)
    assert rect.is_rectangle and rect.area == 600 * 280
    assert parse_roi(roi_to_spec(rect), FRAME_W, FRAME_H) == rect
    tri = parse_roi([[0, 0], [100, 0], [0, 100]], FRAME_W, FRAME_H)
    assert not tri.is_rectangle and tri.area == 5000
    assert parse_roi(roi_to_spec(tri), FRAME_W, FRAME_H) == tri
    assert parse_roi(None, FRAME_W, FRAME_H).area == FRAME_W * FRAME_H


# --- iou ---------------------------------------------------------------------


def test_iou_examples():
    assert iou(BBox(0, 0, 10, 10), BBox(0, 0, 10, 10)) == 1.0
    assert iou(BBox(0, 0, 10, 10), BBox(20, 20, 5, 5)) == 0.0
    assert iou(BBox(0, 0, 10, 10), BBox(5, 5, 10, 10)) == pytest.approx(25 / 175, abs=1e-12)


def test_iou_degenerate_is_zero():
    assert iou(BBox(0, 0, 0, 0), BBox(0, 0, 0, 0)) == 0.0


@given(int_boxes(max_size=2).filter(lambda b: len(b) == 2))
def test_iou_symmetric_and_exact(pair):
    a, b = bboxes(pair)
    assert iou(a, b) == iou(b, a)
    assert iou(a, b) == pytest.approx(float(exact_iou(*pair)), abs=1e-12)
    if a.area > 0:
        assert iou(a, a) == 1.0


@given(int_boxes(max_size=6), int_boxes(max_size=6))
def test_iou_matrix_matches_scalar(a, b):
    m = iou_matrix(np.array([BBox(*r).as_xyxy() for r in a]).reshape(-1, 4),
                   np.array([BBox(*r).as_xyxy() for r in b]).reshape(-1, 4))
    assert m.shape == (len(a), len(b))
    for i, ra in enumerate(a):
        for j, rb in enumerate(b):
            assert m[i, j] == pytest.approx(iou(BBox(*ra), BBox(*rb)), abs=1e-12)


# --- clipping and union area ----------------------------------------------------


def test_clip_box_examples():
    assert clip_box(BBox(-5, -5, 20, 20), 10, 10) == BBox(0, 0, 10, 10)
    assert clip_box(BBox(5, 5, 10, 10), 10, 10) == BBox(5, 5, 5, 5)
    assert clip_box(BBox(20, 20, 5, 5), 10, 10).area == 0


def test_union_area_examples():
    assert union_area([]) == 0
    # value frozen from the rasterization oracle
    assert raster_area([(0, 0, 10, 10), (5, 5, 10, 10)]) == 175
    assert union_area([BBox(0, 0, 10, 10), BBox(5, 5, 10, 10)]) == 175
    assert union_area([BBox(0, 0, 10, 10), BBox(0, 0, 10, 10)]) == 100


def test_union_area_shared_edges_not_double_counted():
    assert union_area([BBox(0, 0, 10, 10), BBox(10, 0, 10, 10), BBox(0, 10, 20, 5)]) == 300


@given(int_boxes())
def test_union_area_matches_raster(raw):
    assert union_area(bboxes(raw)) == raster_area(raw)


@given(int_boxes())
def test_union_area_bounded_by_sum(raw):
    boxes = bboxes(raw)
    total = sum(b.area for b in boxes)
    u = union_area(boxes)
    assert u <= total
    disjoint = all(
        exact_iou(raw[i], raw[j]) == 0 for i in range(len(raw)) for j in range(i + 1, len(raw))
    )
    assert (u == total) == disjoint or total == 0


@given(st.lists(st.tuples(*[st.floats(0, 50, allow_nan=False)] * 4), max_size=8))
def test_union_area_float_boxes_bounded(raw):
    boxes = [BBox(x, y, w, h) for x, y, w, h in raw]
    u = union_area(boxes)
    assert u <= sum(b.area for b in boxes) + 1e-9
    assert u >= max((b.area for b in boxes), default=0.0) - 1e-9


# --- coverage ----------------------------------------------------------------


def test_coverage_examples():
    roi = RoiPolygon.rectangle(0, 0, 100, 100, 100, 100)
    assert coverage_fraction([BBox(0, 0, 50, 50)], roi) == 0.25
    assert coverage_fraction([], roi) == 0.0
    full = RoiPolygon.full_frame(FRAME_W, FRAME_H)
    got = coverage_fraction([BBox(0, 0, 10, 10), BBox(5, 5, 10, 10)], full)
    assert got == pytest.approx(175 / 276500, abs=1e-15)


def test_coverage_clips_to_roi():
    roi = RoiPolygon.rectangle(10, 10, 20, 20, 100, 100)
    assert coverage_fraction([BBox(0, 0, 20, 20)], roi) == 0.25
    assert coverage_fraction([BBox(0, 0, 100, 100)], roi) == 1.0


def test_coverage_polygon_matches_pixel_count():
    # right triangle with legs 100: pixel centers strictly inside the hypotenuse
    tri = RoiPolygon(((0, 0), (100, 0), (0, 100)), 200, 200)
    mask = roi_mask(tri)
    assert mask.sum() == sum(1 for j in range(100) for i in range(100) if i + 0.5 < 100 - (j + 0.5))
    got = coverage_fraction([BBox(0, 0, 50, 50)], tri)
    assert got == 2500 / mask.sum()


def test_coverage_polygon_grid_scale_converges():
    tri = RoiPolygon(((0, 0), (100, 0), (0, 100)), 200, 200)
    box = [BBox(0, 0, 50, 50)]
    exact = 2500 / 5000
    err1 = abs(coverage_fraction(box, tri, 1) - exact)
    err4 = abs(coverage_fraction(box, tri, 4) - exact)
    assert err4 < err1 < 0.02


def test_coverage_rectangle_given_as_vertices_is_exact():
    roi = RoiPolygon(((10.5, 10), (30.5, 10), (30.5, 30), (10.5, 30)), 100, 100)
    assert roi.is_rectangle
    assert coverage_fraction([BBox(0, 0, 20.5, 20)], roi) == 0.25


def test_coverage_bad_grid_scale():
    with pytest.raises(ValidationError):
        coverage_fraction([], RoiPolygon.full_frame(10, 10), 0)


def test_zero_area_polygon_after_rasterization():
    sliver = RoiPolygon(((0, 0.1), (10, 0.1), (10, 0.3)), 10, 10)
    with pytest.raises(ZeroRoiArea):
        coverage_fraction([BBox(0, 0, 1, 1)], sliver)


@given(int_boxes(max_size=8), st.sampled_from(["rect", "poly"]))
def test_coverage_in_unit_interval(raw, kind):
    roi = (RoiPolygon.rectangle(50, 100, 600, 280, FRAME_W, FRAME_H) if kind == "rect"
           else RoiPolygon(((50, 50), (650, 80), (400, 380), (60, 300)), FRAME_W, FRAME_H))
    c = coverage_fraction(bboxes(raw), roi)
    assert 0.0 <= c <= 1.0


def test_degenerate_boxes_contribute_nothing():
    roi = RoiPolygon.full_frame(100, 100)
    assert coverage_fraction([BBox(10, 10, 0, 30), BBox(5, 5, 10, 0)], roi) == 0.0


# --- normalized coordinates ------------------------------------------------------


def test_norm_to_pixel_examples():
    assert norm_to_pixel(NormBox(0.5, 0.5, 1, 1), 700, 395) == BBox(0, 0, 700, 395)
    assert norm_to_pixel(NormBox(0.25, 0.5, 0.5, 0.5), 100, 100) == BBox(0, 25, 50, 50)


def test_pixel_to_norm_out_of_range():
    with pytest.raises(OutOfRange):
        pixel_to_norm(BBox(0, 0, 800, 10), 700, 395)
    with pytest.raises(OutOfRange):
        norm_to_pixel(NormBox(0.5, 0.5, 0.1, 0.1), 0, 395)


@given(int_boxes(max_size=1).filter(len))
def test_norm_round_trip(raw):
    b = BBox(*raw[0])
    back = norm_to_pixel(pixel_to_norm(b, FRAME_W, FRAME_H), FRAME_W, FRAME_H)
    for u, v in zip((b.x, b.y, b.w, b.h), (back.x, back.y, back.w, back.h)):
        assert math.isclose(u, v, abs_tol=1e-9)
