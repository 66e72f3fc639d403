"""Expectation-over-transformation sampling for patch rendering.

A sampled transform is rotation, then scale, then Gaussian blur, then a
brightness factor, with the result clamped to [0, 1]. Rotation and scale
collapse into one bilinear warp; every stage is linear in the pixel values,
and each exposes the exact adjoint so the optimiser's chain rule matches the
forward computation bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EOTParams:
    rotation: tuple[float, float] = (-10.0, 10.0)  # degrees
    scale: tuple[float, float] = (0.85, 1.15)
    blur: tuple[float, float] = (0.0, 1.0)  # Gaussian sigma, pixels
    brightness: tuple[float, float] = (0.9, 1.1)

    def __post_init__(self):
        for name in ("rotation", "scale", "blur", "brightness"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} range is inverted: ({lo}, {hi})")
        if self.scale[0] <= 0:
            raise ValueError("scale must stay positive")
        if self.blur[0] < 0:
            raise ValueError("blur sigma must be >= 0")
        if self.brightness[0] < 0:
            raise ValueError("brightness must be >= 0")

    @classmethod
    def identity(cls) -> "EOTParams":
        return cls(rotation=(0.0, 0.0), scale=(1.0, 1.0), blur=(0.0, 0.0),
                   brightness=(1.0, 1.0))

    def is_identity(self) -> bool:
        return (
            self.rotation == (0.0, 0.0)
            and self.scale == (1.0, 1.0)
            and self.blur == (0.0, 0.0)
            and self.brightness == (1.0, 1.0)
        )


@dataclass(frozen=True)
class EOTSample:
    rotation: float
    scale: float
    blur: float
    brightness: float

    @classmethod
    def identity(cls) -> "EOTSample":
        return cls(0.0, 1.0, 0.0, 1.0)


def sample(params: EOTParams, rng: np.random.Generator) -> EOTSample:
    """Draw one transform, each parameter uniform over its closed range."""
    return EOTSample(
        rotation=float(rng.uniform(*params.rotation)),
        scale=float(rng.uniform(*params.scale)),
        blur=float(rng.uniform(*params.blur)),
        brightness=float(rng.uniform(*params.brightness)),
    )


class _Warp:
    """Bilinear rotate-and-scale about the patch centre, clamp-to-edge.

    Precomputes gather indices and weights; the adjoint scatters with the
    same weights."""

    def __init__(self, h: int, w: int, rotation_deg: float, scale: float):
        self.h, self.w = h, w
        self.identity = rotation_deg == 0.0 and scale == 1.0
        if self.identity:
            return
        theta = math.radians(rotation_deg)
        cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
        yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
        # inverse map: undo scale, then undo rotation
        dy = (yy - cy) / scale
        dx = (xx - cx) / scale
        cos_t, sin_t = math.cos(-theta), math.sin(-theta)
        src_y = cos_t * dy - sin_t * dx + cy
        src_x = sin_t * dy + cos_t * dx + cx
        y0 = np.floor(src_y).astype(int)
        x0 = np.floor(src_x).astype(int)
        fy = src_y - y0
        fx = src_x - x0
        self.weights = [
            ((1 - fy) * (1 - fx)).ravel(),
            ((1 - fy) * fx).ravel(),
            (fy * (1 - fx)).ravel(),
            (fy * fx).ravel(),
        ]
        clip_y = lambda a: np.clip(a, 0, h - 1)
        clip_x = lambda a: np.clip(a, 0, w - 1)
        self.sources = [
            (clip_y(y0).ravel(), clip_x(x0).ravel()),
            (clip_y(y0).ravel(), clip_x(x0 + 1).ravel()),
            (clip_y(y0 + 1).ravel(), clip_x(x0).ravel()),
            (clip_y(y0 + 1).ravel(), clip_x(x0 + 1).ravel()),
        ]

    def forward(self, img: np.ndarray) -> np.ndarray:
        if self.identity:
            return img.copy()
        out = np.zeros_like(img)
        flat = out.reshape(-1, img.shape[2])
        for wgt, (sy, sx) in zip(self.weights, self.sources):
            flat += wgt[:, None] * img[sy, sx]
        return out

    def adjoint(self, grad: np.ndarray) -> np.ndarray:
        if self.identity:
            return grad.copy()
        out = np.zeros_like(grad)
        gflat = grad.reshape(-1, grad.shape[2])
        for wgt, (sy, sx) in zip(self.weights, self.sources):
            np.add.at(out, (sy, sx), wgt[:, None] * gflat)
        return out


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = max(1, int(math.ceil(3.0 * sigma)))
    xs = np.arange(-radius, radius + 1, dtype=float)
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    return k / k.sum()


def _reflect_sources(n: int, radius: int) -> np.ndarray:
    """Source index for every position of a reflect-padded axis of length
    n + 2*radius (numpy 'reflect' convention, edge not repeated)."""
    idx = np.arange(-radius, n + radius)
    return np.abs(idx) * (idx < n) + (2 * n - 2 - idx) * (idx >= n)


class _Blur:
    """Separable Gaussian blur with reflect padding; mean-preserving."""

    def __init__(self, sigma: float, h: int, w: int):
        self.identity = sigma <= 0.0
        if self.identity:
            return
        self.kernel = _gaussian_kernel(sigma)
        self.radius = (len(self.kernel) - 1) // 2
        if h <= self.radius or w <= self.radius:
            raise ValueError(f"blur radius {self.radius} too large for a {h}x{w} patch")
        self.src_y = _reflect_sources(h, self.radius)
        self.src_x = _reflect_sources(w, self.radius)

    def _conv_axis(self, img: np.ndarray, axis: int, sources: np.ndarray) -> np.ndarray:
        padded = np.take(img, sources, axis=axis)
        out = np.zeros_like(img)
        r = self.radius
        n = img.shape[axis]
        for m, kv in enumerate(self.kernel):
            sl = [slice(None)] * img.ndim
            sl[axis] = slice(m, m + n)
            out += kv * padded[tuple(sl)]
        return out

    def _conv_axis_adjoint(self, grad: np.ndarray, axis: int, sources: np.ndarray) -> np.ndarray:
        r = self.radius
        n = grad.shape[axis]
        pad_shape = list(grad.shape)
        pad_shape[axis] = n + 2 * r
        z = np.zeros(pad_shape, dtype=grad.dtype)
        for m, kv in enumerate(self.kernel):
            sl = [slice(None)] * grad.ndim
            sl[axis] = slice(m, m + n)
            z[tuple(sl)] += kv * grad
        out_shape = list(grad.shape)
        out = np.zeros(out_shape, dtype=grad.dtype)
        np.add.at(out, tuple(sources if a == axis else slice(None) for a in range(grad.ndim)), z)
        return out

    def forward(self, img: np.ndarray) -> np.ndarray:
        if self.identity:
            return img.copy()
        return self._conv_axis(self._conv_axis(img, 0, self.src_y), 1, self.src_x)

    def adjoint(self, grad: np.ndarray) -> np.ndarray:
        if self.identity:
            return grad.copy()
        return self._conv_axis_adjoint(self._conv_axis_adjoint(grad, 1, self.src_x), 0, self.src_y)


class EOTOperator:
    """One sampled transform as a differentiable pipeline stage."""

    def __init__(self, smpl: EOTSample, h: int, w: int):
        self.sample = smpl
        self.warp = _Warp(h, w, smpl.rotation, smpl.scale)
        self.blur = _Blur(smpl.blur, h, w)
        self.clamp_mask: np.ndarray | None = None

    def forward(self, patch: np.ndarray) -> np.ndarray:
        out = self.warp.forward(patch)
        out = self.blur.forward(out)
        out = out * self.sample.brightness
        # inclusive mask: pixels sitting exactly on a bound keep their
        # subgradient so projected descent can still move them inward
        self.clamp_mask = (out >= 0.0) & (out <= 1.0)
        return np.clip(out, 0.0, 1.0)

    def vjp(self, grad: np.ndarray) -> np.ndarray:
        if self.clamp_mask is None:
            raise RuntimeError("vjp called before forward")
        g = np.where(self.clamp_mask, grad, 0.0) * self.sample.brightness
        g = self.blur.adjoint(g)
        return self.warp.adjoint(g)


def apply_eot(patch: np.ndarray, smpl: EOTSample) -> np.ndarray:
    """Transform a patch; identity parameters return the input unchanged."""
    arr = np.asarray(patch, dtype=float)
    if arr.ndim != 3:
        raise ValueError(f"patch must be HxWxC, got shape {arr.shape}")
    op = EOTOperator(smpl, arr.shape[0], arr.shape[1])
    return op.forward(arr)
