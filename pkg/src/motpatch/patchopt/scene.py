"""Grayscale scene rendering for the surrogate detector.

A scene is a flat background with darker rectangular pedestrian targets.
Patched targets get the current patch pasted at the standard placement
(upper torso, one third of the body area): the RGB patch goes through the
sampled transform, is resized to the placement rectangle with
nearest-neighbour sampling, converted to luminance, and written over the
body pixels. Every step is linear in the patch values, so render() can hand
back an exact vector-Jacobian product for the optimiser.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..attack import place_patch
from ..geometry import BBox, FrameDims
from .eot import EOTOperator, EOTSample

LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class SceneTarget:
    box: BBox
    intensity: float = 0.15  # body luminance
    patched: bool = True

    def __post_init__(self):
        if not 0.0 <= self.intensity <= 1.0:
            raise ValueError("target intensity must lie in [0, 1]")
        if self.box.area <= 0:
            raise ValueError("target box must have positive area")


@dataclass(frozen=True)
class Scene:
    dims: FrameDims
    targets: tuple[SceneTarget, ...]
    background: float = 0.35

    def __post_init__(self):
        if not self.targets:
            raise ValueError("scene needs at least one target")
        if not 0.0 <= self.background <= 1.0:
            raise ValueError("background luminance must lie in [0, 1]")
        for t in self.targets:
            clipped = _clip_rect(t.box, self.dims)
            if clipped is None:
                raise ValueError(f"target box {t.box} lies outside the {self.dims} frame")

    @property
    def shape(self) -> tuple[int, int]:
        return int(round(self.dims.height)), int(round(self.dims.width))

    def patch_regions(self) -> list[BBox]:
        return [place_patch(t.box) for t in self.targets if t.patched]


def _clip_rect(box: BBox, dims: FrameDims) -> tuple[int, int, int, int] | None:
    """Integer pixel rectangle (y0, y1, x0, x1) of a box, clipped to frame."""
    x0 = max(0, int(round(box.x)))
    y0 = max(0, int(round(box.y)))
    x1 = min(int(round(dims.width)), int(round(box.x2)))
    y1 = min(int(round(dims.height)), int(round(box.y2)))
    if x1 <= x0 or y1 <= y0:
        return None
    return y0, y1, x0, x1


def _nn_indices(out_n: int, src_n: int) -> np.ndarray:
    """Nearest-neighbour source index for each output position."""
    return np.minimum(((np.arange(out_n) + 0.5) * src_n / out_n).astype(int), src_n - 1)


@dataclass
class _PasteCtx:
    rect: tuple[int, int, int, int]
    rows: np.ndarray  # source row in the transformed patch per output row
    cols: np.ndarray
    eot_op: EOTOperator


@dataclass
class RenderCtx:
    """Backward-pass bookkeeping for one rendered frame."""

    patch_shape: tuple[int, int, int]
    pastes: list[_PasteCtx] = field(default_factory=list)

    def vjp(self, grad_raster: np.ndarray) -> np.ndarray:
        """Pull a raster gradient back to the patch pixels."""
        total = np.zeros(self.patch_shape)
        for ctx in self.pastes:
            y0, y1, x0, x1 = ctx.rect
            g = grad_raster[y0:y1, x0:x1]
            g_warped = np.zeros(self.patch_shape[:2])
            np.add.at(g_warped, (ctx.rows[:, None], ctx.cols[None, :]), g)
            g_rgb = g_warped[:, :, None] * LUMA[None, None, :]
            total += ctx.eot_op.vjp(g_rgb)
        return total


def render(
    scene: Scene,
    patch: np.ndarray | None = None,
    eot_sample: EOTSample | None = None,
) -> tuple[np.ndarray, RenderCtx]:
    """Draw the scene; returns the luminance raster and the backward context.

    With patch=None only the background and bodies are drawn (the clean
    scene the detector is calibrated against)."""
    h, w = scene.shape
    raster = np.full((h, w), scene.background, dtype=float)
    for t in scene.targets:
        rect = _clip_rect(t.box, scene.dims)
        if rect:
            y0, y1, x0, x1 = rect
            raster[y0:y1, x0:x1] = t.intensity

    if patch is None:
        return raster, RenderCtx(patch_shape=(0, 0, 3))

    arr = np.asarray(patch, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"patch must be HxWx3, got shape {arr.shape}")
    smpl = eot_sample or EOTSample.identity()
    ctx = RenderCtx(patch_shape=arr.shape)
    for t in scene.targets:
        if not t.patched:
            continue
        region = place_patch(t.box)
        rect = _clip_rect(region, scene.dims)
        if rect is None:
            continue
        y0, y1, x0, x1 = rect
        op = EOTOperator(smpl, arr.shape[0], arr.shape[1])
        transformed = op.forward(arr)
        rows = _nn_indices(y1 - y0, arr.shape[0])
        cols = _nn_indices(x1 - x0, arr.shape[1])
        lum = transformed @ LUMA
        raster[y0:y1, x0:x1] = lum[rows[:, None], cols[None, :]]
        ctx.pastes.append(_PasteCtx(rect=rect, rows=rows, cols=cols, eot_op=op))
    return raster, ctx


def scenes_from_gt(
    gt_boxes_by_frame: dict[int, list[BBox]],
    dims: FrameDims,
    intensity: float = 0.15,
    background: float = 0.35,
) -> list[Scene]:
    """One scene per frame, a target per ground-truth box."""
    scenes = []
    for f in sorted(gt_boxes_by_frame):
        targets = tuple(SceneTarget(box=b, intensity=intensity) for b in gt_boxes_by_frame[f])
        scenes.append(Scene(dims=dims, targets=targets, background=background))
    return scenes


def build_clip_dataset(scenes: list[Scene], margin: float = 0.2) -> list[Scene]:
    """Crop one sub-scene around every target of every frame.

    The crop keeps a margin of 20% of the box size on each side, clipped to
    the frame, and rebases all intersecting targets into crop coordinates."""
    crops: list[Scene] = []
    for scene in scenes:
        for t in scene.targets:
            b = t.box
            mx, my = margin * b.w, margin * b.h
            cx0 = max(0.0, b.x - mx)
            cy0 = max(0.0, b.y - my)
            cx1 = min(scene.dims.width, b.x2 + mx)
            cy1 = min(scene.dims.height, b.y2 + my)
            dims = FrameDims(cx1 - cx0, cy1 - cy0)
            kept = []
            for other in scene.targets:
                ob = other.box
                nx0 = max(ob.x, cx0) - cx0
                ny0 = max(ob.y, cy0) - cy0
                nx1 = min(ob.x2, cx1) - cx0
                ny1 = min(ob.y2, cy1) - cy0
                if nx1 - nx0 >= 1.0 and ny1 - ny0 >= 1.0:
                    kept.append(replace(other, box=BBox(nx0, ny0, nx1 - nx0, ny1 - ny0)))
            if kept:
                crops.append(Scene(dims=dims, targets=tuple(kept), background=scene.background))
    return crops
