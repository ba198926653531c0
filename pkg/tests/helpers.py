"""Independent brute-force oracles used to cross-check the fast paths.

Nothing here touches PrefixSum or the vectorized scan: sums are direct cell
loops and set metrics run on explicit boolean masks, so these stay valid
reference implementations no matter how the production code evolves.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from splade.lattice import Grid, Rect


def direct_rect_sum(grid: Grid, r: Rect) -> float:
    if r.is_empty:
        return 0.0
    return float(grid.data[r.slices()].sum())


def direct_contrast(grid: Grid, r: Rect) -> float:
    n = grid.size
    v = r.volume()
    inside = direct_rect_sum(grid, r)
    total = float(grid.data.sum())
    b = math.sqrt(v * (n - v)) / n
    return b * (inside / v - (total - inside) / (n - v))


def all_rects(dims):
    axes = [
        [(lo, hi) for lo in range(n) for hi in range(lo + 1, n + 1)] for n in dims
    ]
    for combo in itertools.product(*axes):
        yield Rect(tuple(c[0] for c in combo), tuple(c[1] for c in combo))


def brute_force_ls(grid: Grid, lambda1: float, lambda2: float) -> Rect:
    """Exhaustive argmax by direct summation; same tie-break as production."""
    n = grid.size
    best = None
    for r in all_rects(grid.dims):
        v = r.volume()
        if not n * lambda1 < v < n * lambda2 or v >= n:
            continue
        score = abs(direct_contrast(grid, r))
        key = (-score, v, r.lo, r.hi)
        if best is None or key < best[0]:
            best = (key, r)
    assert best is not None and -best[0][0] > 0.0
    return best[1]


def rect_mask(dims, r: Rect) -> np.ndarray:
    m = np.zeros(dims, dtype=bool)
    if not r.is_empty:
        m[r.slices()] = True
    return m


def mask_jaccard(a: np.ndarray, b: np.ndarray) -> float:
    union = int((a | b).sum())
    if union == 0:
        return 0.0
    return int((a ^ b).sum()) / union


def mask_hausdorff(truth_rects, est_rects, dims) -> float:
    """Two-sided Hausdorff over explicit masks, backgrounds included."""

    def members(rects):
        sets = [rect_mask(dims, r) for r in rects if not r.is_empty]
        bg = np.ones(dims, dtype=bool)
        for m in sets:
            bg &= ~m
        if bg.any():
            sets.append(bg)
        return sets

    a = members(truth_rects)
    b = members(est_rects)
    if not a and not b:
        return 0.0
    if not a or not b:
        return 1.0
    fwd = max(min(mask_jaccard(x, y) for y in b) for x in a)
    bwd = max(min(mask_jaccard(y, x) for x in a) for y in b)
    return max(fwd, bwd)
