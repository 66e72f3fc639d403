"""Central finite-difference gradients, the oracle the analytic ones are
checked against."""

from __future__ import annotations

from typing import Callable

import numpy as np


def grad_fd(fn: Callable[[np.ndarray], float], patch: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Per-element central difference of fn at patch."""
    if step <= 0:
        raise ValueError("step must be positive")
    arr = np.array(patch, dtype=float, copy=True)
    grad = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = arr[idx]
        arr[idx] = orig + step
        hi = fn(arr)
        arr[idx] = orig - step
        lo = fn(arr)
        arr[idx] = orig
        grad[idx] = (hi - lo) / (2.0 * step)
    return grad


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """Worst elementwise relative disagreement, floored to dodge 0/0."""
    denom = np.maximum(np.abs(numeric), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))
