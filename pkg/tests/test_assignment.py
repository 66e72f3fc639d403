import itertools
import math
import time

import numpy as np
import pytest

from motpatch.assignment import AssignmentResult, CostMatrix, gate_sentinel, solve

# index arrays of every permutation, keyed by size, built once
_PERMS = {n: np.array(list(itertools.permutations(range(n)))) for n in range(1, 8)}


def brute_force_min(costs: np.ndarray) -> float:
    """Exact optimum by enumerating every complete assignment."""
    n, m = costs.shape
    if n <= m:
        perms = _PERMS[m][:, :n] if n < m else _PERMS[n]
        totals = costs[np.arange(n)[None, :], perms].sum(axis=1)
    else:
        perms = _PERMS[n][:, :m]
        totals = costs[perms, np.arange(m)[None, :]].sum(axis=1)
    return float(totals.min())


def dyadic_costs(rng, n, m):
    # multiples of 1/1024: sums of up to seven terms are exact in binary,
    # so solver and oracle totals must agree to the last bit
    return rng.integers(0, 1000, size=(n, m)).astype(float) / 1024.0


def test_matches_brute_force_on_500_matrices_under_5s():
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    for k in range(500):
        n = int(rng.integers(1, 8))
        m = int(rng.integers(1, 8))
        costs = dyadic_costs(rng, n, m)
        res = solve(CostMatrix(costs))
        assert res.total_cost == brute_force_min(costs), f"matrix {k}"
        assert len(res.matches) == min(n, m)
    assert time.perf_counter() - t0 < 5.0


def test_gated_entries_never_matched():
    rng = np.random.default_rng(3)
    for _ in range(100):
        costs = rng.uniform(0, 1, size=(5, 5))
        gate = 0.5
        res = solve(CostMatrix(costs, gate=gate))
        for r, c in res.matches:
            assert costs[r, c] <= gate


def test_all_gated_yields_no_matches():
    costs = np.full((3, 3), 0.9)
    res = solve(CostMatrix(costs, gate=0.5))
    assert res.matches == []
    assert res.total_cost == 0.0
    assert res.unmatched_rows == [0, 1, 2]
    assert res.unmatched_cols == [0, 1, 2]


def test_gating_beats_padding_when_partial_is_cheaper():
    # matching both rows would force one expensive pair; gating drops it
    costs = np.array([[0.1, 0.9], [0.9, 0.9]])
    res = solve(CostMatrix(costs, gate=0.5))
    assert res.matches == [(0, 0)]
    assert res.total_cost == pytest.approx(0.1)
    assert res.unmatched_rows == [1]
    assert res.unmatched_cols == [1]


def test_lexicographic_tie_break():
    # every assignment costs 1.0; the refinement must pick the identity
    costs = np.full((3, 3), 1.0 / 3.0)
    res = solve(CostMatrix(costs))
    assert res.matches == [(0, 0), (1, 1), (2, 2)]


def test_total_uses_exact_summation():
    costs = np.full((3, 3), 1.0)
    np.fill_diagonal(costs, [0.1, 0.2, 0.3])
    res = solve(CostMatrix(costs, gate=0.9))
    assert res.matches == [(0, 0), (1, 1), (2, 2)]
    assert res.total_cost == math.fsum([0.1, 0.2, 0.3])


def test_rectangular_shapes():
    costs = np.array([[0.2, 0.1, 0.3]])
    res = solve(CostMatrix(costs))
    assert res.matches == [(0, 1)]
    assert res.unmatched_cols == [0, 2]

    costs = np.array([[0.2], [0.1], [0.3]])
    res = solve(CostMatrix(costs))
    assert res.matches == [(1, 0)]
    assert res.unmatched_rows == [0, 2]


def test_empty_matrix():
    res = solve(CostMatrix(np.zeros((0, 3))))
    assert res.matches == []
    assert res.unmatched_cols == [0, 1, 2]


def test_gate_sentinel_exceeds_any_entry():
    cm = CostMatrix(np.array([[5.0, 2.0]]), gate=1.0)
    assert gate_sentinel(cm) > 5.0


def test_result_is_deterministic():
    rng = np.random.default_rng(9)
    costs = rng.uniform(0, 1, size=(6, 6))
    a = solve(CostMatrix(costs, gate=0.8))
    b = solve(CostMatrix(costs.copy(), gate=0.8))
    assert a == b
