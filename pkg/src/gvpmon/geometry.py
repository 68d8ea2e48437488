"""Domain types and exact box/polygon geometry.

All pixel coordinates use a top-left origin with y growing downward. Boxes
are treated as half-open rectangles ``[x, x + w) x [y, y + h)`` wherever a
point-membership question arises (rasterization), so boxes that share an
edge never double count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidRoi, OutOfRange, ValidationError, ZeroRoiArea

WASTE = 0
NON_WASTE = 1
CLASS_NAMES = ("waste", "non-waste")

NORM_TOLERANCE = 1e-6


@dataclass(frozen=True, slots=True)
class BBox:
    """Axis-aligned box in pixels, corner format."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.w) and math.isfinite(self.h)):
            raise OutOfRange(f"BBox coordinates must be finite, got {self!r}")
        if self.w < 0 or self.h < 0:
            raise OutOfRange(f"BBox width/height must be non-negative, got w={self.w}, h={self.h}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_xyxy(self) -> tuple[float, float, float, float]:
        return self.x, self.y, self.x + self.w, self.y + self.h


@dataclass(frozen=True, slots=True)
class NormBox:
    """YOLO-style box: center and size as fractions of the frame."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        lo, hi = -NORM_TOLERANCE, 1 + NORM_TOLERANCE
        if not (lo <= self.cx <= hi and lo <= self.cy <= hi and lo <= self.w <= hi and lo <= self.h <= hi):
            raise OutOfRange(f"NormBox fields must lie in [0, 1], got {self!r}")


@dataclass(frozen=True, slots=True)
class Detection:
    box: BBox
    confidence: float
    class_id: int = WASTE

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise OutOfRange(f"confidence {self.confidence!r} outside [0, 1]")


@dataclass(frozen=True, slots=True)
class GroundTruthBox:
    box: BBox
    class_id: int = WASTE


@dataclass(frozen=True, slots=True)
class FrameRecord:
    """A timestamped frame with the detections produced for it."""

    frame_id: str
    timestamp: int
    detections: tuple[Detection, ...] = field(default=())

    def __post_init__(self):
        if not isinstance(self.detections, tuple):
            object.__setattr__(self, "detections", tuple(self.detections))


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return (v > 0) - (v < 0)

    def on_segment(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_segment(p1, p2, q1):
        return True
    if o2 == 0 and on_segment(p1, p2, q2):
        return True
    if o3 == 0 and on_segment(q1, q2, p1):
        return True
    if o4 == 0 and on_segment(q1, q2, p2):
        return True
    return False


@dataclass(frozen=True, slots=True)
class RoiPolygon:
    """Region of interest inside a frame; the denominator of every coverage figure."""

    vertices: tuple[tuple[float, float], ...]
    frame_w: float
    frame_h: float

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if self.frame_w <= 0 or self.frame_h <= 0:
            raise InvalidRoi(f"frame dimensions must be positive, got {self.frame_w}x{self.frame_h}")
        if len(verts) < 3:
            raise InvalidRoi(f"ROI needs at least 3 vertices, got {len(verts)}")
        for x, y in verts:
            if not (0 <= x <= self.frame_w and 0 <= y <= self.frame_h):
                raise InvalidRoi(f"vertex ({x}, {y}) outside the {self.frame_w}x{self.frame_h} frame")
        n = len(verts)
        edges = [(verts[i], verts[(i + 1) % n]) for i in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue
                if _segments_intersect(*edges[i], *edges[j]):
                    raise InvalidRoi("ROI polygon is self-intersecting")
        if self.area <= 0:
            raise ZeroRoiArea("ROI polygon has zero area")

    @classmethod
    def rectangle(cls, x: float, y: float, w: float, h: float, frame_w: float, frame_h: float) -> "RoiPolygon":
        return cls(((x, y), (x + w, y), (x + w, y + h), (x, y + h)), frame_w, frame_h)

    @classmethod
    def full_frame(cls, frame_w: float, frame_h: float) -> "RoiPolygon":
        return cls.rectangle(0, 0, frame_w, frame_h, frame_w, frame_h)

    @property
    def area(self) -> float:
        """Shoelace area (absolute)."""
        v = self.vertices
        s = 0.0
        for i in range(len(v)):
            x1, y1 = v[i]
            x2, y2 = v[(i + 1) % len(v)]
            s += x1 * y2 - x2 * y1
        return abs(s) / 2.0

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        xs = [p[0] for p in self.vertices]
        ys = [p[1] for p in self.vertices]
        return min(xs), min(ys), max(xs), max(ys)

    @property
    def is_rectangle(self) -> bool:
        if len(self.vertices) != 4:
            return False
        x0, y0, x1, y1 = self.bounds
        corners = {(x0, y0), (x1, y0), (x1, y1), (x0, y1)}
        if set(self.vertices) != corners:
            return False
        # consecutive vertices must share one coordinate (no diagonal edges)
        v = self.vertices
        return all(v[i][0] == v[(i + 1) % 4][0] or v[i][1] == v[(i + 1) % 4][1] for i in range(4))

    def to_dict(self) -> dict:
        return {
            "vertices": [list(p) for p in self.vertices],
            "frame_w": self.frame_w,
            "frame_h": self.frame_h,
        }


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; 0 when the union is empty."""
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    inter = iw * ih if iw > 0 and ih > 0 else 0.0
    union = a.w * a.h + b.w * b.h - inter
    if union <= 0:
        return 0.0
    return inter / union


def boxes_to_array(boxes: Iterable[BBox]) -> np.ndarray:
    """Stack boxes as an ``(n, 4)`` float array of ``x0, y0, x1, y1``."""
    arr = np.array([(b.x, b.y, b.x + b.w, b.y + b.h) for b in boxes], dtype=np.float64)
    return arr.reshape(-1, 4)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between two ``(n, 4)`` / ``(m, 4)`` xyxy arrays."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
    return out


def clip_box(b: BBox, frame_w: float, frame_h: float) -> BBox:
    """Intersect ``b`` with the frame rectangle. The result may have zero area."""
    x0 = min(max(b.x, 0.0), frame_w)
    y0 = min(max(b.y, 0.0), frame_h)
    x1 = min(max(b.x + b.w, 0.0), frame_w)
    y1 = min(max(b.y + b.h, 0.0), frame_h)
    return BBox(x0, y0, max(0.0, x1 - x0), max(0.0, y1 - y0))


def union_area_xyxy(arr: np.ndarray) -> float:
    """Exact union area of xyxy rectangles.

    Coordinates are compressed onto the distinct edge values; each rectangle
    adds +1/-1 corners to a 2-D difference table, and cumulative sums along x
    (the sweep) then y give the cover count of every elementary cell.
    """
    arr = np.asarray(arr, dtype=np.float64).reshape(-1, 4)
    if arr.shape[0] == 0:
        return 0.0
    arr = arr[(arr[:, 2] > arr[:, 0]) & (arr[:, 3] > arr[:, 1])]
    n = arr.shape[0]
    if n == 0:
        return 0.0
    if n == 1:
        r = arr[0]
        return float((r[2] - r[0]) * (r[3] - r[1]))
    xs, xinv = np.unique(arr[:, [0, 2]], return_inverse=True)
    ys, yinv = np.unique(arr[:, [1, 3]], return_inverse=True)
    xinv = xinv.reshape(n, 2)
    yinv = yinv.reshape(n, 2)
    diff = np.zeros((xs.size, ys.size), dtype=np.int32)
    np.add.at(diff, (xinv[:, 0], yinv[:, 0]), 1)
    np.add.at(diff, (xinv[:, 1], yinv[:, 0]), -1)
    np.add.at(diff, (xinv[:, 0], yinv[:, 1]), -1)
    np.add.at(diff, (xinv[:, 1], yinv[:, 1]), 1)
    cover = diff.cumsum(axis=0).cumsum(axis=1)[:-1, :-1] > 0
    dx = np.diff(xs)
    dy = np.diff(ys)
    return float(dx @ (cover @ dy))


def union_area(boxes: Sequence[BBox]) -> float:
    """Area of the union of axis-aligned boxes; overlaps count once."""
    if not boxes:
        return 0.0
    return union_area_xyxy(boxes_to_array(boxes))


def _cell_range(lo: float, hi: float, scale: int, n: int) -> tuple[int, int]:
    # cells whose center (i + 0.5) / scale lies in [lo, hi)
    start = max(0, math.ceil(lo * scale - 0.5))
    stop = min(n, math.ceil(hi * scale - 0.5))
    return start, max(start, stop)


@lru_cache(maxsize=32)
def roi_mask(roi: RoiPolygon, grid_scale: int = 1) -> np.ndarray:
    """Scanline rasterization of the ROI at ``grid_scale`` cells per pixel.

    A cell belongs to the ROI when its center is inside the polygon
    (even-odd rule, left-closed spans). The returned array is read-only.
    """
    nx = math.ceil(roi.frame_w * grid_scale)
    ny = math.ceil(roi.frame_h * grid_scale)
    mask = np.zeros((ny, nx), dtype=bool)
    v = roi.vertices
    edges = [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]
    for j in range(ny):
        yc = (j + 0.5) / grid_scale
        xings = []
        for (x1, y1), (x2, y2) in edges:
            if (y1 <= yc < y2) or (y2 <= yc < y1):
                xings.append(x1 + (yc - y1) * (x2 - x1) / (y2 - y1))
        xings.sort()
        for k in range(0, len(xings) - 1, 2):
            a, b = _cell_range(xings[k], xings[k + 1], grid_scale, nx)
            mask[j, a:b] = True
    mask.setflags(write=False)
    return mask


def coverage_fraction(boxes: Sequence[BBox], roi: RoiPolygon, grid_scale: int = 1) -> float:
    """Fraction of the ROI covered by the union of ``boxes``.

    Rectangular ROIs are handled exactly (clip, then sweep). Any other polygon
    is rasterized together with the boxes at ``grid_scale`` cells per pixel.
    """
    if grid_scale < 1:
        raise ValidationError(f"grid_scale must be >= 1, got {grid_scale}")
    if roi.is_rectangle:
        roi_area = roi.area
        if roi_area <= 0:
            raise ZeroRoiArea("ROI has zero area")
        if not boxes:
            return 0.0
        rx0, ry0, rx1, ry1 = roi.bounds
        arr = boxes_to_array(boxes)
        arr[:, [0, 2]] = np.clip(arr[:, [0, 2]], rx0, rx1)
        arr[:, [1, 3]] = np.clip(arr[:, [1, 3]], ry0, ry1)
        return min(1.0, union_area_xyxy(arr) / roi_area)

    mask = roi_mask(roi, grid_scale)
    roi_cells = int(mask.sum())
    if roi_cells == 0:
        raise ZeroRoiArea("ROI covers no raster cells at this grid scale")
    if not boxes:
        return 0.0
    ny, nx = mask.shape
    covered = np.zeros_like(mask)
    for b in boxes:
        if b.w <= 0 or b.h <= 0:
            continue
        x0, x1 = _cell_range(b.x, b.x + b.w, grid_scale, nx)
        y0, y1 = _cell_range(b.y, b.y + b.h, grid_scale, ny)
        covered[y0:y1, x0:x1] = True
    return int((covered & mask).sum()) / roi_cells


def norm_to_pixel(n: NormBox, frame_w: float, frame_h: float) -> BBox:
    if frame_w <= 0 or frame_h <= 0:
        raise OutOfRange(f"frame dimensions must be positive, got {frame_w}x{frame_h}")
    w = n.w * frame_w
    h = n.h * frame_h
    return BBox(n.cx * frame_w - w / 2.0, n.cy * frame_h - h / 2.0, w, h)


def pixel_to_norm(b: BBox, frame_w: float, frame_h: float) -> NormBox:
    """Corner-format pixels to center-format fractions; raises ``OutOfRange``
    when the result leaves the unit interval."""
    if frame_w <= 0 or frame_h <= 0:
        raise OutOfRange(f"frame dimensions must be positive, got {frame_w}x{frame_h}")
    return NormBox(
        (b.x + b.w / 2.0) / frame_w,
        (b.y + b.h / 2.0) / frame_h,
        b.w / frame_w,
        b.h / frame_h,
    )


def parse_roi(spec, frame_w: float, frame_h: float) -> RoiPolygon:
    """Build an ROI from a config value.

    Accepts ``None`` (whole frame), ``{"rect": [x, y, w, h]}``,
    ``{"vertices": [[x, y], ...]}``, a bare ``[x, y, w, h]`` list, or a list of
    vertex pairs.
    """
    if spec is None:
        return RoiPolygon.full_frame(frame_w, frame_h)
    if isinstance(spec, RoiPolygon):
        return spec
    if isinstance(spec, dict):
        if "rect" in spec:
            return RoiPolygon.rectangle(*[float(v) for v in spec["rect"]], frame_w, frame_h)
        if "vertices" in spec:
            return RoiPolygon(tuple(tuple(p) for p in spec["vertices"]), frame_w, frame_h)
        raise InvalidRoi(f"ROI spec needs 'rect' or 'vertices', got keys {sorted(spec)}")
    seq = list(spec)
    if len(seq) == 4 and all(isinstance(v, (int, float)) for v in seq):
        return RoiPolygon.rectangle(*[float(v) for v in seq], frame_w, frame_h)
    return RoiPolygon(tuple(tuple(p) for p in seq), frame_w, frame_h)


def roi_to_spec(roi: RoiPolygon):
    if roi.is_rectangle:
        x0, y0, x1, y1 = roi.bounds
        return {"rect": [x0, y0, x1 - x0, y1 - y0]}
    return {"vertices": [list(p) for p in roi.vertices]}
