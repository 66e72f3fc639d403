"""Axis-aligned box primitives shared by the tracker, attack and metrics code.

Boxes are stored as top-left corner plus size, in pixel units. The tracker's
filter state uses the (cx, cy, aspect, height) parameterisation, so the
conversions live here next to the IoU helpers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FrameDims:
    """Pixel dimensions of the image frame."""

    width: float
    height: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"frame dims must be positive, got {self.width}x{self.height}")


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: top-left (x, y), width w, height h. Sizes must be >= 0."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w < 0 or self.h < 0:
            raise ValueError(f"box size must be non-negative, got w={self.w} h={self.h}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def cx(self) -> float:
        return self.x + self.w / 2.0

    @property
    def cy(self) -> float:
        return self.y + self.h / 2.0

    @property
    def area(self) -> float:
        return self.w * self.h

    def shifted(self, dx: float, dy: float) -> "BBox":
        return BBox(self.x + dx, self.y + dy, self.w, self.h)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h], dtype=float)


def to_xyah(box: BBox) -> np.ndarray:
    """Convert a box to (center x, center y, aspect w/h, height)."""
    if box.h <= 0:
        raise ValueError("xyah conversion needs h > 0")
    return np.array([box.cx, box.cy, box.w / box.h, box.h], dtype=float)


def from_xyah(xyah: np.ndarray | list | tuple) -> BBox:
    """Inverse of :func:`to_xyah`."""
    cx, cy, a, h = (float(v) for v in xyah)
    w = a * h
    return BBox(cx - w / 2.0, cy - h / 2.0, w, h)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union. Returns 0.0 when the union is empty."""
    ix = max(a.x, b.x)
    iy = max(a.y, b.y)
    ix2 = min(a.x2, b.x2)
    iy2 = min(a.y2, b.y2)
    iw = max(0.0, ix2 - ix)
    ih = max(0.0, iy2 - iy)
    inter = iw * ih
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def iou_matrix(rows: list[BBox], cols: list[BBox]) -> np.ndarray:
    """Pairwise IoU, vectorised. rows x cols."""
    if not rows or not cols:
        return np.zeros((len(rows), len(cols)))
    ra = np.array([[b.x, b.y, b.x2, b.y2] for b in rows])
    ca = np.array([[b.x, b.y, b.x2, b.y2] for b in cols])
    ix = np.maximum(ra[:, None, 0], ca[None, :, 0])
    iy = np.maximum(ra[:, None, 1], ca[None, :, 1])
    ix2 = np.minimum(ra[:, None, 2], ca[None, :, 2])
    iy2 = np.minimum(ra[:, None, 3], ca[None, :, 3])
    inter = np.clip(ix2 - ix, 0.0, None) * np.clip(iy2 - iy, 0.0, None)
    area_r = (ra[:, 2] - ra[:, 0]) * (ra[:, 3] - ra[:, 1])
    area_c = (ca[:, 2] - ca[:, 0]) * (ca[:, 3] - ca[:, 1])
    union = area_r[:, None] + area_c[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def clip_to_frame(box: BBox, dims: FrameDims) -> BBox:
    """Clip a box to the frame; a box fully outside collapses to zero size."""
    x1 = min(max(box.x, 0.0), dims.width)
    y1 = min(max(box.y, 0.0), dims.height)
    x2 = min(max(box.x2, 0.0), dims.width)
    y2 = min(max(box.y2, 0.0), dims.height)
    return BBox(x1, y1, max(0.0, x2 - x1), max(0.0, y2 - y1))
