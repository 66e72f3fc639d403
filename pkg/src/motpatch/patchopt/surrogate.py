"""A small differentiable anchor detector over luminance rasters.

Anchors live on a fixed stride-8 grid with three box sizes. Each size
carries a two-level center-surround template; the correlation of a window
with its template is the difference between the mean luminance of the inner
box and of the surrounding ring, signed by the template polarity. The two
larger sizes use dark-center templates (pedestrian-like bodies on a lighter
background), the smallest uses a bright-center one (compact high-luminance
blobs). A logistic squash turns correlation into a score:

    score = sigmoid(alpha * (correlation - bias))

Everything is linear in the raster up to the final sigmoid, so score
gradients with respect to pixels are exact and cheap. Rasters are padded
with a constant background value before scoring, which keeps the full
anchor grid valid on arbitrarily small crops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import BBox, iou_matrix
from ..tracker import Detection

# (width, height, polarity): +1 scores bright-inside, -1 dark-inside
DEFAULT_TEMPLATES = ((24, 48, 1), (32, 64, -1), (48, 96, -1))


@dataclass(frozen=True)
class DetectorConfig:
    stride: int = 8
    templates: tuple[tuple[int, int, int], ...] = DEFAULT_TEMPLATES
    window_factor: float = 1.5
    alpha: float = 40.0
    bias: float = 0.12
    nms_iou: float = 0.45
    score_thresh: float = 0.5
    pad_value: float = 0.35  # assumed background luminance outside the raster

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if not self.templates:
            raise ValueError("need at least one template size")
        for w, h, pol in self.templates:
            if w < 2 or h < 2:
                raise ValueError("template sides must be >= 2")
            if pol not in (-1, 1):
                raise ValueError("template polarity must be +1 or -1")
        if self.window_factor <= 1.0:
            raise ValueError("window must be strictly larger than the inner box")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not 0.0 < self.nms_iou < 1.0:
            raise ValueError("nms_iou must lie in (0, 1)")

    @property
    def pad(self) -> int:
        """Padding that makes every window valid anywhere on the raster."""
        worst = max(max(w, h) for w, h, _ in self.templates)
        return int(np.ceil(worst * self.window_factor / 2)) + 1


@dataclass(frozen=True)
class AnchorGrid:
    """Flat arrays describing every anchor of a raster."""

    shape: tuple[int, int]  # raster (h, w) the grid was built for
    boxes: np.ndarray  # (K, 4) inner boxes as x, y, w, h in raster coords
    inner: np.ndarray  # (K, 4) int rects x0, y0, x1, y1
    window: np.ndarray  # (K, 4) int rects
    polarity: np.ndarray  # (K,) +-1
    n_inner: np.ndarray  # (K,) pixel counts
    n_ring: np.ndarray

    def __len__(self) -> int:
        return self.boxes.shape[0]

    def centers_in(self, box: BBox) -> np.ndarray:
        """Indices of anchors whose center lies inside the box."""
        cx = self.boxes[:, 0] + self.boxes[:, 2] / 2
        cy = self.boxes[:, 1] + self.boxes[:, 3] / 2
        hit = (cx > box.x) & (cx < box.x2) & (cy > box.y) & (cy < box.y2)
        return np.flatnonzero(hit)

    def best_overlap(self, box: BBox) -> int:
        """Index of the anchor whose inner box best overlaps the given box."""
        ious = iou_matrix([BBox(*b) for b in self.boxes], [box])[:, 0]
        return int(np.argmax(ious))


def build_anchor_grid(shape: tuple[int, int], cfg: DetectorConfig) -> AnchorGrid:
    h, w = int(shape[0]), int(shape[1])
    if h < 1 or w < 1:
        raise ValueError("raster must be non-empty")
    cxs = np.arange(0, w, cfg.stride)
    cys = np.arange(0, h, cfg.stride)
    boxes, inner, window, pol = [], [], [], []
    for tw, th, tp in cfg.templates:
        ww = int(round(tw * cfg.window_factor))
        wh = int(round(th * cfg.window_factor))
        gx, gy = np.meshgrid(cxs, cys)
        gx = gx.ravel()
        gy = gy.ravel()
        boxes.append(np.stack([gx - tw / 2, gy - th / 2, np.full_like(gx, tw), np.full_like(gy, th)], axis=1))
        inner.append(np.stack([gx - tw // 2, gy - th // 2, gx - tw // 2 + tw, gy - th // 2 + th], axis=1))
        window.append(np.stack([gx - ww // 2, gy - wh // 2, gx - ww // 2 + ww, gy - wh // 2 + wh], axis=1))
        pol.append(np.full(gx.shape, tp))
    inner_arr = np.concatenate(inner).astype(int)
    window_arr = np.concatenate(window).astype(int)
    n_inner = (inner_arr[:, 2] - inner_arr[:, 0]) * (inner_arr[:, 3] - inner_arr[:, 1])
    n_window = (window_arr[:, 2] - window_arr[:, 0]) * (window_arr[:, 3] - window_arr[:, 1])
    return AnchorGrid(
        shape=(h, w),
        boxes=np.concatenate(boxes).astype(float),
        inner=inner_arr,
        window=window_arr,
        polarity=np.concatenate(pol).astype(float),
        n_inner=n_inner.astype(float),
        n_ring=(n_window - n_inner).astype(float),
    )


def _padded_integral(raster: np.ndarray, cfg: DetectorConfig) -> np.ndarray:
    padded = np.pad(np.asarray(raster, dtype=float), cfg.pad, constant_values=cfg.pad_value)
    integ = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1))
    integ[1:, 1:] = padded.cumsum(axis=0).cumsum(axis=1)
    return integ


def _rect_sums(integ: np.ndarray, rects: np.ndarray, pad: int) -> np.ndarray:
    x0 = rects[:, 0] + pad
    y0 = rects[:, 1] + pad
    x1 = rects[:, 2] + pad
    y1 = rects[:, 3] + pad
    return integ[y1, x1] - integ[y0, x1] - integ[y1, x0] + integ[y0, x0]


def correlations(raster: np.ndarray, grid: AnchorGrid, cfg: DetectorConfig) -> np.ndarray:
    """Signed template correlation of every anchor."""
    integ = _padded_integral(raster, cfg)
    inner_sum = _rect_sums(integ, grid.inner, cfg.pad)
    window_sum = _rect_sums(integ, grid.window, cfg.pad)
    inner_mean = inner_sum / grid.n_inner
    ring_mean = (window_sum - inner_sum) / grid.n_ring
    return grid.polarity * (inner_mean - ring_mean)


def anchor_scores(raster: np.ndarray, grid: AnchorGrid, cfg: DetectorConfig) -> np.ndarray:
    """Pre-suppression score of every anchor (the losses read these)."""
    z = cfg.alpha * (correlations(raster, grid, cfg) - cfg.bias)
    return 1.0 / (1.0 + np.exp(-z))


def score_grad_raster(
    shape: tuple[int, int],
    grid: AnchorGrid,
    cfg: DetectorConfig,
    scores: np.ndarray,
    coeffs: dict[int, float],
) -> np.ndarray:
    """Gradient of sum(coeffs[k] * score_k) with respect to raster pixels.

    The mean over a rect is a box filter, so each anchor contributes two
    constant-valued slice adds: one over its window, one over its inner box."""
    h, w = int(shape[0]), int(shape[1])
    pad = cfg.pad
    grad = np.zeros((h + 2 * pad, w + 2 * pad))
    for k, c in coeffs.items():
        if c == 0.0:
            continue
        s = scores[k]
        base = c * cfg.alpha * s * (1.0 - s) * grid.polarity[k]
        wx0, wy0, wx1, wy1 = grid.window[k] + pad
        ix0, iy0, ix1, iy1 = grid.inner[k] + pad
        # d corr / d pixel: -pol/n_ring on the ring, +pol/n_inner inside
        grad[wy0:wy1, wx0:wx1] -= base / grid.n_ring[k]
        grad[iy0:iy1, ix0:ix1] += base * (1.0 / grid.n_inner[k] + 1.0 / grid.n_ring[k])
    return grad[pad : pad + h, pad : pad + w]


def detect(
    raster: np.ndarray,
    cfg: DetectorConfig | None = None,
    frame: int = 1,
    grid: AnchorGrid | None = None,
) -> list[Detection]:
    """Thresholded anchors after greedy overlap suppression."""
    cfg = cfg or DetectorConfig()
    arr = np.asarray(raster, dtype=float)
    if grid is None or grid.shape != arr.shape:
        grid = build_anchor_grid(arr.shape, cfg)
    scores = anchor_scores(arr, grid, cfg)
    cand = np.flatnonzero(scores >= cfg.score_thresh)
    if cand.size == 0:
        return []
    order = cand[np.lexsort((grid.boxes[cand, 1], grid.boxes[cand, 0], -scores[cand]))]
    kept: list[int] = []
    boxes = [BBox(*map(float, grid.boxes[k])) for k in order]
    ious = iou_matrix(boxes, boxes)
    for i in range(len(order)):
        if all(ious[i, j] <= cfg.nms_iou for j in kept):
            kept.append(i)
    return [
        Detection(box=boxes[i], score=float(scores[order[i]]), frame=frame, source="genuine")
        for i in kept
    ]
