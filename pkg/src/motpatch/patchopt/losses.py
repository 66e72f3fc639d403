"""Objective terms for patch optimisation, with analytic gradients.

Three terms combine into the total objective:

bounding-box regression term   pushes the patch's detection box small and
                               toward high overlap with the target's box
total variation                keeps neighbouring patch pixels close, so the
                               result survives printing and blur
score term                     drives the target's detection confidence down

The weighted sum uses (beta, gamma, delta) = (1, 2.5, 2) by default.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..geometry import BBox, FrameDims

TV_EPS = 1e-8


@dataclass(frozen=True)
class LossWeights:
    beta: float = 1.0  # bounding-box regression term
    gamma: float = 2.5  # total variation
    delta: float = 2.0  # detection-score term

    def __post_init__(self):
        if self.beta < 0 or self.gamma < 0 or self.delta < 0:
            raise ValueError("loss weights must be non-negative")


def loss_bbr(
    patch_boxes: Sequence[BBox],
    target_boxes: Sequence[BBox],
    widths: Sequence[float],
    heights: Sequence[float],
    dims: FrameDims,
) -> float:
    """Size term plus one minus the mean overlap between patch and target
    detection boxes; widths/heights are the predicted target box sizes."""
    n = len(target_boxes)
    if n == 0:
        raise ValueError("loss_bbr needs at least one target")
    if not (len(patch_boxes) == len(widths) == len(heights) == n):
        raise ValueError("patch_boxes, target_boxes, widths and heights must align")
    size_term = sum(w / dims.width + h / dims.height for w, h in zip(widths, heights)) / n
    overlap = sum(_iou(p, t) for p, t in zip(patch_boxes, target_boxes)) / n
    return size_term + (1.0 - overlap)


def loss_tv(patch: np.ndarray) -> float:
    """Total variation with the channel differences pooled inside the root.

    Boundary rows/columns contribute only the neighbour differences that
    exist; a constant patch scores at most 1e-4 per pixel (the epsilon)."""
    arr = np.asarray(patch, dtype=float)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"patch must be HxW or HxWxC, got shape {arr.shape}")
    dy = np.zeros_like(arr)
    dx = np.zeros_like(arr)
    dy[:-1] = arr[1:] - arr[:-1]
    dx[:, :-1] = arr[:, 1:] - arr[:, :-1]
    per_pixel = np.sqrt((dy**2).sum(axis=2) + (dx**2).sum(axis=2) + TV_EPS)
    return float(per_pixel.sum())


def grad_tv(patch: np.ndarray) -> np.ndarray:
    """Analytic gradient of loss_tv with respect to the patch pixels."""
    arr = np.asarray(patch, dtype=float)
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[:, :, None]
    dy = np.zeros_like(arr)
    dx = np.zeros_like(arr)
    dy[:-1] = arr[1:] - arr[:-1]
    dx[:, :-1] = arr[:, 1:] - arr[:, :-1]
    root = np.sqrt((dy**2).sum(axis=2) + (dx**2).sum(axis=2) + TV_EPS)
    gy = dy / root[:, :, None]
    gx = dx / root[:, :, None]
    grad = np.zeros_like(arr)
    grad -= gy  # d/dI[i,j] of (I[i+1,j]-I[i,j]) term at (i,j)
    grad[1:] += gy[:-1]
    grad -= gx
    grad[:, 1:] += gx[:, :-1]
    return grad[:, :, 0] if squeeze else grad


def loss_ap(scores: Sequence[float]) -> float:
    """Mean detection score of the patched targets."""
    if len(scores) == 0:
        raise ValueError("loss_ap needs at least one score")
    return float(np.mean(np.asarray(scores, dtype=float)))


def loss_total(bbr: float, tv: float, ap: float, weights: LossWeights | None = None) -> float:
    w = weights or LossWeights()
    return w.beta * bbr + w.gamma * tv + w.delta * ap


def _iou(a: BBox, b: BBox) -> float:
    ix = max(a.x, b.x)
    iy = max(a.y, b.y)
    iw = max(0.0, min(a.x2, b.x2) - ix)
    ih = max(0.0, min(a.y2, b.y2) - iy)
    inter = iw * ih
    union = a.area + b.area - inter
    return inter / union if union > 0 else 0.0


def iou_box_grad(p: BBox, t: BBox) -> np.ndarray:
    """d IoU(p, t) / d (p.x, p.y, p.w, p.h), t held fixed.

    Piecewise smooth; at a kink (box edges exactly aligned) the right-sided
    value is returned."""
    ix = max(p.x, t.x)
    iy = max(p.y, t.y)
    ix2 = min(p.x2, t.x2)
    iy2 = min(p.y2, t.y2)
    iw = ix2 - ix
    ih = iy2 - iy
    if iw <= 0 or ih <= 0:
        return np.zeros(4)
    inter = iw * ih
    union = p.area + t.area - inter

    d_ix_px = 1.0 if p.x > t.x else 0.0
    d_ix2_px = 1.0 if p.x2 < t.x2 else 0.0
    d_iw_px = d_ix2_px - d_ix_px
    d_iw_pw = 1.0 if p.x2 < t.x2 else 0.0
    d_iy_py = 1.0 if p.y > t.y else 0.0
    d_iy2_py = 1.0 if p.y2 < t.y2 else 0.0
    d_ih_py = d_iy2_py - d_iy_py
    d_ih_ph = 1.0 if p.y2 < t.y2 else 0.0

    d_inter = np.array([ih * d_iw_px, iw * d_ih_py, ih * d_iw_pw, iw * d_ih_ph])
    d_area = np.array([0.0, 0.0, p.h, p.w])
    d_union = d_area - d_inter
    return (d_inter * union - inter * d_union) / union**2
