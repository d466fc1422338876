"""Axis-aligned rectangle arithmetic.

Boxes are stored in corner form ``(x1, y1, x2, y2)`` in page pixels, as
double-precision floats. COCO ``(x, y, w, h)`` conversion happens only at the
I/O boundary (:func:`BBox.from_xywh` / :meth:`BBox.to_xywh`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class GeometryError(ValueError):
    """Raised for degenerate boxes or invalid geometric arguments."""


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box with strictly positive area.

    On construction ``x2`` and ``y2`` are snapped to ``x1 + (x2 - x1)`` (and
    likewise for y). The snap moves a coordinate by at most one ulp and makes
    the corner -> xywh -> corner round trip exact, so serialized layouts load
    back field-for-field.
    """

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        x1, y1, x2, y2 = (float(v) for v in (self.x1, self.y1, self.x2, self.y2))
        if not all(math.isfinite(v) for v in (x1, y1, x2, y2)):
            raise GeometryError(f"non-finite box coordinates: {(x1, y1, x2, y2)}")
        if not (x1 < x2 and y1 < y2):
            raise GeometryError(f"degenerate box: {(x1, y1, x2, y2)}")
        x2 = x1 + (x2 - x1)
        y2 = y1 + (y2 - y1)
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "x2", x2)
        object.__setattr__(self, "y2", y2)

    @classmethod
    def from_xywh(cls, x: float, y: float, w: float, h: float) -> "BBox":
        if not (w > 0 and h > 0):
            raise GeometryError(f"degenerate xywh box: {(x, y, w, h)}")
        return cls(x, y, x + w, y + h)

    def to_xywh(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2 - self.x1, self.y2 - self.y1)

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    def contains(self, other: "BBox") -> bool:
        return (
            self.x1 <= other.x1
            and self.y1 <= other.y1
            and other.x2 <= self.x2
            and other.y2 <= self.y2
        )

    def within(self, width: float, height: float) -> bool:
        """True if the box lies inside the page ``[0, width] x [0, height]``."""
        return self.x1 >= 0 and self.y1 >= 0 and self.x2 <= width and self.y2 <= height


def intersection_area(a: BBox, b: BBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union; 0 for disjoint or edge-touching boxes."""
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    return inter / (a.area + b.area - inter)


def iou_matrix(rows: Sequence[BBox], cols: Sequence[BBox]) -> np.ndarray:
    """Pairwise IoU, shape ``(len(rows), len(cols))``.

    Uses the same operation order as :func:`iou`, so entries are bit-identical
    to the scalar function.
    """
    if not rows or not cols:
        return np.zeros((len(rows), len(cols)), dtype=np.float64)
    a = np.array([b.as_tuple() for b in rows], dtype=np.float64)
    b = np.array([b.as_tuple() for b in cols], dtype=np.float64)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(inter > 0, inter / union, 0.0)
    return out


def area_ratio(pred: BBox, gt: BBox) -> float:
    """``area(pred) / area(gt)``."""
    return pred.area / gt.area


def center_distance(a: BBox, b: BBox) -> float:
    (ax, ay), (bx, by) = a.center, b.center
    return math.hypot(ax - bx, ay - by)


def enclosing_rect(boxes: Iterable[BBox]) -> BBox:
    """Smallest axis-aligned box containing every input box."""
    boxes = list(boxes)
    if not boxes:
        raise GeometryError("enclosing_rect of an empty box list")
    x1, y1 = min(b.x1 for b in boxes), min(b.y1 for b in boxes)
    x2, y2 = max(b.x2 for b in boxes), max(b.y2 for b in boxes)
    cx2, cy2 = x2, y2
    r = BBox(x1, y1, cx2, cy2)
    # snapping may pull the far edge in by an ulp; push it back out
    while r.x2 < x2 or r.y2 < y2:
        if r.x2 < x2:
            cx2 = math.nextafter(cx2, math.inf)
        if r.y2 < y2:
            cy2 = math.nextafter(cy2, math.inf)
        r = BBox(x1, y1, cx2, cy2)
    return r


def scale_about_center(b: BBox, sx: float, sy: float) -> BBox:
    """Scale width by ``sx`` and height by ``sy`` keeping the center fixed."""
    if not (sx > 0 and sy > 0):
        raise GeometryError(f"scale factors must be positive, got {(sx, sy)}")
    cx, cy = b.center
    hw = b.width * sx / 2.0
    hh = b.height * sy / 2.0
    return BBox(cx - hw, cy - hh, cx + hw, cy + hh)


def translate(b: BBox, dx: float, dy: float) -> BBox:
    return BBox(b.x1 + dx, b.y1 + dy, b.x2 + dx, b.y2 + dy)


def clamp_to_page(b: BBox, width: float, height: float) -> BBox:
    return BBox(max(b.x1, 0.0), max(b.y1, 0.0), min(b.x2, width), min(b.y2, height))
