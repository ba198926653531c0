"""Dense lattice grids, axis-aligned rectangles, and prefix-sum machinery.

Indexing convention, used repo-wide: a rectangle is the half-open cell set
``(lo, hi]`` in 1-based lattice coordinates, which coincides with the 0-based
NumPy slice ``lo:hi``.  ``lo`` is the exclusive lower corner, ``hi`` the
inclusive upper corner, and the cell count is ``prod(hi - lo)``.  A rectangle
with ``hi_k <= lo_k`` on any axis is empty.

All objects here are immutable after construction and safe to share across
threads; every operation is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_DIM = 4

# Above this cell count, prefix sums accumulate in extended precision to keep
# rectangle sums (and hence contrast denominators) accurate.
_EXTENDED_PRECISION_CELLS = 2**24


class LatticeError(ValueError):
    """Invalid grid, rectangle, or query."""


def _as_dims(dims) -> tuple[int, ...]:
    t = tuple(int(x) for x in dims)
    if not 1 <= len(t) <= MAX_DIM:
        raise LatticeError(f"dimension {len(t)} outside supported range 1..{MAX_DIM}")
    if any(x < 1 for x in t):
        raise LatticeError(f"dims entries must be >= 1, got {t}")
    return t


@dataclass(frozen=True)
class Grid:
    """A dense d-dimensional real-valued lattice field."""

    dims: tuple[int, ...]
    data: np.ndarray  # float64, shape == dims, C (row-major) order

    def __post_init__(self):
        object.__setattr__(self, "dims", _as_dims(self.dims))
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.shape != self.dims:
            raise LatticeError(f"data shape {arr.shape} != dims {self.dims}")
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, arr) -> "Grid":
        a = np.asarray(arr, dtype=np.float64)
        return cls(dims=a.shape, data=a)

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))


@dataclass(frozen=True, order=True)
class Rect:
    """Half-open axis-aligned rectangle ``(lo, hi]`` (== NumPy slice ``lo:hi``)."""

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self):
        lo = tuple(int(x) for x in self.lo)
        hi = tuple(int(x) for x in self.hi)
        if len(lo) != len(hi):
            raise LatticeError(f"corner ranks differ: {lo} vs {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def ndim(self) -> int:
        return len(self.lo)

    @property
    def is_empty(self) -> bool:
        return any(h <= l for l, h in zip(self.lo, self.hi))

    def volume(self) -> int:
        if self.is_empty:
            return 0
        return int(np.prod([h - l for l, h in zip(self.lo, self.hi)]))

    def slices(self) -> tuple[slice, ...]:
        return tuple(slice(l, h) for l, h in zip(self.lo, self.hi))

    def intersect(self, other: "Rect") -> "Rect":
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(min(a, b) for a, b in zip(self.hi, other.hi))
        return Rect(lo, hi)

    def within(self, dims) -> bool:
        return all(0 <= l and h <= n for l, h, n in zip(self.lo, self.hi, dims))

    def shift(self, offset) -> "Rect":
        return Rect(
            tuple(l + o for l, o in zip(self.lo, offset)),
            tuple(h + o for h, o in zip(self.hi, offset)),
        )


@dataclass(frozen=True)
class PatchSet:
    """True anomaly description: disjoint patch rectangles with mean jumps."""

    patches: tuple[tuple[Rect, float], ...]
    baseline: float = 0.0

    def __post_init__(self):
        patches = tuple((r, float(j)) for r, j in self.patches)
        for r, j in patches:
            if j == 0.0:
                raise LatticeError("patch jump must be nonzero")
            if r.is_empty:
                raise LatticeError("patch rectangle must be non-empty")
        for i in range(len(patches)):
            for k in range(i + 1, len(patches)):
                if not patches[i][0].intersect(patches[k][0]).is_empty:
                    raise LatticeError(
                        f"patches {patches[i][0]} and {patches[k][0]} overlap"
                    )
        object.__setattr__(self, "patches", patches)
        object.__setattr__(self, "baseline", float(self.baseline))

    @property
    def rects(self) -> tuple[Rect, ...]:
        return tuple(r for r, _ in self.patches)

    @property
    def jumps(self) -> tuple[float, ...]:
        return tuple(j for _, j in self.patches)


@dataclass(frozen=True)
class PrefixSum:
    """Cumulative-sum table with a zero-padded border.

    ``table[i1, ..., id]`` is the sum of grid cells in the slice
    ``[0:i1, ..., 0:id]``, so any rectangle sum is a 2^d-term
    inclusion-exclusion over corner entries.
    """

    dims: tuple[int, ...]
    table: np.ndarray  # shape == dims + 1 per axis

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    @property
    def total(self) -> float:
        return float(self.table[tuple(self.dims)])


def build_prefix_sum(grid: Grid) -> PrefixSum:
    """Summed table enabling O(2^d) rectangle sums; built in one pass per axis."""
    n = grid.size
    if n > np.iinfo(np.int64).max:
        raise LatticeError("grid too large to address")
    acc_dtype = np.longdouble if n > _EXTENDED_PRECISION_CELLS else np.float64
    t = grid.data.astype(acc_dtype)
    for ax in range(grid.ndim):
        t = np.cumsum(t, axis=ax)
    t = np.asarray(t, dtype=np.float64)
    padded = np.zeros(tuple(d + 1 for d in grid.dims), dtype=np.float64)
    padded[tuple(slice(1, None) for _ in grid.dims)] = t
    return PrefixSum(dims=grid.dims, table=padded)


def rect_sum(ps: PrefixSum, r: Rect) -> float:
    """Sum of grid cells inside ``r`` (0.0 for an empty rectangle)."""
    if r.ndim != len(ps.dims):
        raise LatticeError(f"rectangle rank {r.ndim} != grid rank {len(ps.dims)}")
    if r.is_empty:
        return 0.0
    if not r.within(ps.dims):
        raise LatticeError(f"rectangle {r} out of bounds for dims {ps.dims}")
    d = r.ndim
    total = 0.0
    for corner in range(1 << d):
        idx = []
        neg = 0
        for k in range(d):
            if corner >> k & 1:
                idx.append(r.lo[k])
                neg += 1
            else:
                idx.append(r.hi[k])
        term = float(ps.table[tuple(idx)])
        total += -term if neg & 1 else term
    return total


def contrast(ps: PrefixSum, r: Rect) -> float:
    """Signed scaled mean difference between ``r`` and its complement.

    Computes ``sqrt(v * (n - v)) / n * (mean_inside - mean_outside)`` where
    ``v`` is the rectangle volume and ``n`` the grid size.  Estimators maximize
    the absolute value of this statistic.  Empty and full rectangles are domain
    errors (the complement mean would be undefined).
    """
    n = ps.size
    v = r.volume()
    if not 0 < v < n:
        raise LatticeError(f"contrast needs 0 < volume < {n}, got {v}")
    s = rect_sum(ps, r)
    b = math.sqrt(v * (n - v)) / n
    return b * (s / v - (ps.total - s) / (n - v))


def sym_diff_volume(a: Rect, b: Rect) -> int:
    """Cell count of the symmetric difference of two rectangles."""
    return a.volume() + b.volume() - 2 * a.intersect(b).volume()
