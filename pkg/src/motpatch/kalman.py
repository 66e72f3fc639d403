"""Constant-velocity Kalman filter over (cx, cy, aspect, height) boxes.

State is 8-dimensional: the four observed box coordinates plus their
velocities. Process and measurement noise scale with the box height so the
same config works across object sizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BBox, from_xyah, to_xyah

_NDIM = 4


@dataclass
class KalmanParams:
    """Noise scaling, relative to box height."""

    pos_weight: float = 1.0 / 20.0
    vel_weight: float = 1.0 / 160.0


@dataclass
class KalmanState:
    mean: np.ndarray  # shape (8,)
    cov: np.ndarray  # shape (8, 8), symmetric PSD

    def box(self) -> BBox:
        return from_xyah(self.mean[:_NDIM])


def _motion_matrix() -> np.ndarray:
    f = np.eye(2 * _NDIM)
    for i in range(_NDIM):
        f[i, _NDIM + i] = 1.0
    return f


_F = _motion_matrix()
_H = np.eye(_NDIM, 2 * _NDIM)


def initiate(box: BBox, params: KalmanParams | None = None) -> KalmanState:
    """New filter state from an unmatched detection; velocities start at zero."""
    p = params or KalmanParams()
    mean = np.zeros(2 * _NDIM)
    mean[:_NDIM] = to_xyah(box)
    h = box.h
    std = np.array(
        [
            2 * p.pos_weight * h,
            2 * p.pos_weight * h,
            1e-2,
            2 * p.pos_weight * h,
            10 * p.vel_weight * h,
            10 * p.vel_weight * h,
            1e-5,
            10 * p.vel_weight * h,
        ]
    )
    return KalmanState(mean=mean, cov=np.diag(std**2))


def predict(state: KalmanState, params: KalmanParams | None = None) -> KalmanState:
    """One motion step; covariance grows by the process noise."""
    p = params or KalmanParams()
    h = max(state.mean[3], 1e-6)
    std = np.array(
        [
            p.pos_weight * h,
            p.pos_weight * h,
            1e-2,
            p.pos_weight * h,
            p.vel_weight * h,
            p.vel_weight * h,
            1e-5,
            p.vel_weight * h,
        ]
    )
    q = np.diag(std**2)
    mean = _F @ state.mean
    cov = _F @ state.cov @ _F.T + q
    return KalmanState(mean=mean, cov=cov)


def _projection(state: KalmanState, params: KalmanParams) -> tuple[np.ndarray, np.ndarray]:
    h = max(state.mean[3], 1e-6)
    std = np.array(
        [
            params.pos_weight * h,
            params.pos_weight * h,
            1e-1,
            params.pos_weight * h,
        ]
    )
    r = np.diag(std**2)
    return _H @ state.mean, _H @ state.cov @ _H.T + r


def update(state: KalmanState, box: BBox, params: KalmanParams | None = None) -> KalmanState:
    """Fold one measured box into the state."""
    p = params or KalmanParams()
    z = to_xyah(box)
    proj_mean, proj_cov = _projection(state, p)
    # gain = P H' S^-1, solved rather than inverted
    gain = np.linalg.solve(proj_cov, (_H @ state.cov)).T
    innovation = z - proj_mean
    mean = state.mean + gain @ innovation
    cov = state.cov - gain @ proj_cov @ gain.T
    cov = (cov + cov.T) / 2.0  # keep symmetric against round-off
    return KalmanState(mean=mean, cov=cov)
