"""Single-patch estimators.

``naive_ls`` scores every rectangle in the grid (the exhaustive least-squares
estimator, equivalently the |contrast| argmax).  ``algorithm1`` is the
two-stage accelerated version: a coarse pass on a strided subsample localizes
the corners, then an exhaustive pass restricted to windows around those
corners refines them on the full grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._scan import (
    DegenerateScanError,
    NoAdmissibleRectError,
    best_rectangle,
    window_half_width,
)
from .lattice import Grid, LatticeError, Rect, build_prefix_sum


class DegenerateGridError(LatticeError):
    """All admissible contrasts vanish (constant grid)."""


class SubsampleError(LatticeError):
    """Subsampling leaves too few points per axis for a first-stage search."""


@dataclass(frozen=True)
class SearchBounds:
    """Volume constraints: admissible rectangles satisfy n*lambda1 < |I| < n*lambda2."""

    lambda1: float = 0.0
    lambda2: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.lambda1 < 1.0:
            raise LatticeError(f"lambda1 must be in [0, 1), got {self.lambda1}")
        if not self.lambda1 < self.lambda2 <= 1.0:
            raise LatticeError(
                f"lambda2 must be in (lambda1, 1], got {self.lambda2}"
            )


@dataclass(frozen=True)
class Stage1Params:
    """Tuning for the two-stage search.

    ``alpha`` sets the subsampling stride (floor(n_k^alpha) per axis), ``kappa``
    the window growth rate, and ``window_const`` the window-width constant.
    Consistency of the two-stage estimator needs alpha + kappa < 1.
    """

    alpha: float = 0.5
    kappa: float = 0.01
    window_const: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise LatticeError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.kappa < 0.0:
            raise LatticeError(f"kappa must be >= 0, got {self.kappa}")
        if self.alpha + self.kappa >= 1.0:
            raise LatticeError("alpha + kappa must be < 1")
        if self.window_const <= 0.0:
            raise LatticeError("window_const must be > 0")


def subsample(grid: Grid, alpha: float) -> tuple[Grid, tuple[int, ...]]:
    """Strided point sample of the grid.

    Keeps single observations (not block means) at positions 0, L_k, 2*L_k, ...
    per axis with L_k = floor(n_k^alpha), yielding ceil(n_k / L_k) points.
    """
    if not 0.0 < alpha < 1.0:
        raise LatticeError(f"alpha must be in (0, 1), got {alpha}")
    strides = tuple(max(1, int(math.floor(n**alpha))) for n in grid.dims)
    counts = tuple(-(-n // l) for n, l in zip(grid.dims, strides))
    if any(m < 4 for m in counts):
        raise SubsampleError(
            f"alpha={alpha} leaves counts {counts}; need >= 4 points per axis"
        )
    sampled = grid.data[tuple(slice(None, None, l) for l in strides)]
    return Grid.from_array(np.ascontiguousarray(sampled)), strides


def naive_ls(grid: Grid, bounds: SearchBounds) -> Rect:
    """Exhaustive |contrast| argmax over all admissible rectangles.

    Costs O(prod(n_k^2)) candidate evaluations, each O(2^d) via the prefix
    table.  Ties break to the smallest volume, then lexicographic corners.
    """
    ps = build_prefix_sum(grid)
    lo_axes = [np.arange(0, n, dtype=np.int64) for n in grid.dims]
    hi_axes = [np.arange(1, n + 1, dtype=np.int64) for n in grid.dims]
    n = grid.size
    try:
        rect, _ = best_rectangle(
            ps, lo_axes, hi_axes, n * bounds.lambda1, n * bounds.lambda2
        )
    except DegenerateScanError as e:
        raise DegenerateGridError(str(e)) from e
    except NoAdmissibleRectError as e:
        raise LatticeError(str(e)) from e
    return rect


def _stage1_bounds(m: int) -> SearchBounds:
    lam = min(4.0 / m, 0.49)
    return SearchBounds(lam, 1.0 - lam)


def algorithm1(grid: Grid, params: Stage1Params, bounds: SearchBounds | None = None) -> Rect:
    """Two-stage single-patch localization.

    Stage 1 runs ``naive_ls`` on the subsampled grid (with conservative default
    volume bounds that exclude only near-degenerate candidates).  Stage 2
    exhaustively scores every (lo, hi) pair whose corners fall in windows
    around the stage-1 corners, clipped to the domain, using the full-grid
    contrast.  ``bounds``, when given, constrains stage-2 volumes relative to
    the full grid size; windows wide enough to cover the whole grid therefore
    make the output identical to ``naive_ls(grid, bounds)``.
    """
    sub, strides = subsample(grid, params.alpha)
    coarse = naive_ls(sub, _stage1_bounds(sub.size))

    n = grid.size
    d = grid.ndim
    lo_axes = []
    hi_axes = []
    for k, (nk, lk) in enumerate(zip(grid.dims, strides)):
        hw = window_half_width(lk, nk, n, d, params.kappa, params.window_const)
        c_lo = lk * coarse.lo[k]
        c_hi = lk * coarse.hi[k]
        lo_axes.append(np.arange(max(0, c_lo - hw), min(nk - 1, c_lo + hw) + 1))
        hi_axes.append(np.arange(max(1, c_hi - hw), min(nk, c_hi + hw) + 1))

    if bounds is None:
        bounds = SearchBounds()
    ps = build_prefix_sum(grid)
    try:
        rect, _ = best_rectangle(
            ps, lo_axes, hi_axes, n * bounds.lambda1, n * bounds.lambda2
        )
    except DegenerateScanError as e:
        raise DegenerateGridError(str(e)) from e
    return rect
