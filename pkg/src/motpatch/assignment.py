"""Minimum-cost assignment with gating and deterministic tie-breaking.

The Hungarian core is scipy's linear_sum_assignment. Gating follows the
sentinel convention: entries above the gate are replaced by a large finite
sentinel before solving, and matches whose true cost exceeded the gate are
dropped afterwards. Among equal-cost optima the solver returns the matching
whose (row, col) list is lexicographically smallest, so repeated runs on the
same input always agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

_TIE_TOL = 1e-9


@dataclass(frozen=True)
class CostMatrix:
    """Non-negative cost matrix plus a gate; pairs with cost > gate are forbidden."""

    costs: np.ndarray
    gate: float = math.inf

    def __post_init__(self):
        c = np.asarray(self.costs, dtype=float)
        if c.ndim != 2:
            raise ValueError(f"cost matrix must be 2-D, got shape {c.shape}")
        if c.size and (not np.isfinite(c).all() or (c < 0).any()):
            raise ValueError("costs must be finite and non-negative")
        if self.gate < 0:
            raise ValueError(f"gate must be non-negative, got {self.gate}")
        object.__setattr__(self, "costs", c)


@dataclass(frozen=True)
class AssignmentResult:
    matches: list[tuple[int, int]]
    unmatched_rows: list[int]
    unmatched_cols: list[int]
    total_cost: float = field(default=0.0)


def gate_sentinel(cm: CostMatrix) -> float:
    """Sentinel for forbidden entries: big enough that using one extra
    forbidden pair always costs more than any rearrangement of allowed ones,
    small enough that allowed-cost differences survive float cancellation."""
    allowed = cm.costs[cm.costs <= cm.gate] if cm.costs.size else np.array([])
    peak = float(allowed.max()) if allowed.size else 0.0
    return max(1e6, 2.0 + 2.0 * min(cm.costs.shape) * peak)


def _lsa_total(costs: np.ndarray) -> float:
    """Optimal total of a (possibly empty) matrix, summed with fsum."""
    if costs.size == 0:
        return 0.0
    ri, ci = linear_sum_assignment(costs)
    return math.fsum(costs[r, c] for r, c in zip(ri, ci))


def solve(cm: CostMatrix) -> AssignmentResult:
    """Solve the gated assignment problem.

    Returns matches sorted by row index. When several matchings share the
    optimal total, ties are broken toward the lowest row index, then the
    lowest column index.
    """
    costs = cm.costs
    n_rows, n_cols = costs.shape
    if n_rows == 0 or n_cols == 0:
        return AssignmentResult([], list(range(n_rows)), list(range(n_cols)), 0.0)

    sentinel = gate_sentinel(cm)
    work = np.where(costs > cm.gate, sentinel, costs)
    best_total = _lsa_total(work)
    tol = _TIE_TOL * max(1.0, min(n_rows, n_cols))

    # Greedy lexicographic refinement: fix rows in order, each to the smallest
    # column still consistent with the optimal total. A row may stay unmatched
    # only when there are more rows than columns.
    chosen: list[tuple[int, int]] = []
    free_cols = list(range(n_cols))
    remaining_rows = list(range(n_rows))
    fixed: list[float] = []
    for i in range(n_rows):
        remaining_rows.remove(i)
        placed = False
        for j in free_cols:
            sub = work[np.ix_(remaining_rows, [c for c in free_cols if c != j])]
            trial = math.fsum(fixed + [work[i, j], _lsa_total(sub)])
            if trial <= best_total + tol:
                chosen.append((i, j))
                free_cols.remove(j)
                fixed.append(work[i, j])
                placed = True
                break
        if not placed and n_rows <= n_cols:
            raise RuntimeError("assignment refinement failed to place a row")

    matches = [(r, c) for r, c in chosen if costs[r, c] <= cm.gate]
    matched_rows = {r for r, _ in matches}
    matched_cols = {c for _, c in matches}
    total = math.fsum(costs[r, c] for r, c in matches)
    return AssignmentResult(
        matches=matches,
        unmatched_rows=[r for r in range(n_rows) if r not in matched_rows],
        unmatched_cols=[c for c in range(n_cols) if c not in matched_cols],
        total_cost=total,
    )
