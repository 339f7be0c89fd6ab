"""Slow, independent reference computations used only by the tests.

Nothing here imports the package's fitting code.
"""
from __future__ import annotations

import math

import numpy as np

TIE_RTOL = 1e-9


def sse(ys) -> float:
    if not ys:
        return 0.0
    m = sum(ys) / len(ys)
    return sum((v - m) ** 2 for v in ys)


def candidate_splits(rows, min_leaf):
    """Every legal (feature, threshold, left, right) split of ``rows`` (list of (x, y))."""
    p = len(rows[0][0])
    for f in range(p):
        values = sorted({x[f] for x, _ in rows})
        for a, b in zip(values, values[1:]):
            thr = (a + b) / 2
            left = [r for r in rows if r[0][f] <= thr]
            right = [r for r in rows if r[0][f] > thr]
            if len(left) >= min_leaf and len(right) >= min_leaf:
                yield f, thr, left, right


def greedy_tree_sse(rows, max_depth=None, min_leaf=1, min_split=2, depth=0) -> float:
    """Training SSE of the greedy tree, found by scoring every candidate split at every node."""
    ys = [y for _, y in rows]
    min_split = max(min_split, 2)
    if (max_depth is not None and depth >= max_depth) or len(rows) < min_split or max(ys) == min(ys):
        return sse(ys)
    scored = [(sse([y for _, y in l]) + sse([y for _, y in r]), f, thr, l, r)
              for f, thr, l, r in candidate_splits(rows, min_leaf)]
    if not scored:
        return sse(ys)
    best = min(s[0] for s in scored)
    tol = TIE_RTOL * max(1.0, sum((y - sum(ys) / len(ys)) ** 2 for y in ys))
    ties = [s for s in scored if s[0] <= best + tol]
    _, f, thr, left, right = min(ties, key=lambda s: (s[1], s[2]))
    return (greedy_tree_sse(left, max_depth, min_leaf, min_split, depth + 1)
            + greedy_tree_sse(right, max_depth, min_leaf, min_split, depth + 1))


def optimal_tree_sse(rows, max_depth=None, min_leaf=1, min_split=2, depth=0) -> float:
    """Lowest training SSE over every tree obeying the same depth/leaf/split limits."""
    ys = [y for _, y in rows]
    best = sse(ys)
    min_split = max(min_split, 2)
    if (max_depth is not None and depth >= max_depth) or len(rows) < min_split or best == 0:
        return best
    for _, _, left, right in candidate_splits(rows, min_leaf):
        best = min(best, optimal_tree_sse(left, max_depth, min_leaf, min_split, depth + 1)
                   + optimal_tree_sse(right, max_depth, min_leaf, min_split, depth + 1))
    return best


def best_depth1_split(xs, ys):
    """Exhaustive single split on one feature: (threshold, left_mean, right_mean, sse)."""
    pts = sorted(zip(xs, ys))
    best = None
    for k in range(1, len(pts)):
        if pts[k - 1][0] == pts[k][0]:
            continue
        left = [y for _, y in pts[:k]]
        right = [y for _, y in pts[k:]]
        total = sse(left) + sse(right)
        if best is None or total < best[3]:
            best = ((pts[k - 1][0] + pts[k][0]) / 2, sum(left) / len(left), sum(right) / len(right), total)
    return best


def random_search_min(objective, low, high, n=100_000, seed=0) -> float:
    rng = np.random.default_rng(seed)
    low, high = np.asarray(low, float), np.asarray(high, float)
    pts = low + rng.random((n, len(low))) * (high - low)
    return float(np.min(objective(pts)))


def population_std(values) -> float:
    m = sum(values) / len(values)
    return math.sqrt(sum((v - m) ** 2 for v in values) / len(values))


def linear_percentile(values, q) -> float:
    """Percentile by linear interpolation between closest ranks (rank = q/100 * (n-1))."""
    xs = sorted(values)
    r = q / 100 * (len(xs) - 1)
    lo = math.floor(r)
    hi = min(lo + 1, len(xs) - 1)
    return xs[lo] + (xs[hi] - xs[lo]) * (r - lo)
