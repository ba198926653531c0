"""Vectorized argmax of the rectangle contrast over product candidate sets.

The search space is the Cartesian product of per-axis lower-corner candidates
and per-axis upper-corner candidates.  Scoring is chunked so memory stays flat
regardless of candidate count; a broadcast fast path covers d=2 (the common
case) and a gather path covers the other ranks.

Scoring uses the identity |contrast| = |S - v*T/n| / sqrt(v*(n-v)) (S = sum
inside, v = volume, T = grand total), and compares squared scores, so the hot
loop is a handful of fused array passes.

Tie-breaking is deterministic: maximal |contrast|, then smallest volume, then
lexicographically smallest lower corner, then upper corner.  Chunks iterate in
C order with ascending per-axis candidates, so the first hit inside a chunk is
already the lexicographic minimum.
"""

from __future__ import annotations

import math
from itertools import product

import numpy as np

from .lattice import PrefixSum, Rect

_CHUNK_ELEMS = 1 << 19


class NoAdmissibleRectError(ValueError):
    """Candidate set empty after volume and ordering constraints."""


class DegenerateScanError(ValueError):
    """Every admissible candidate has zero contrast (constant data)."""


class _Best:
    __slots__ = ("score_sq", "vol", "lo", "hi")

    def __init__(self):
        self.score_sq = -1.0
        self.vol = 0
        self.lo = None
        self.hi = None

    def offer(self, score_sq, vol, lo, hi):
        if score_sq > self.score_sq or (
            score_sq == self.score_sq
            and self.lo is not None
            and (vol, lo, hi) < (self.vol, self.lo, self.hi)
        ):
            self.score_sq, self.vol, self.lo, self.hi = score_sq, vol, lo, hi


class _Scratch:
    """Flat scratch arrays reused across chunks (allocation is the hot cost)."""

    def __init__(self):
        self._f8 = {}
        self._b1 = {}

    def f8(self, key, shape):
        need = int(np.prod(shape))
        buf = self._f8.get(key)
        if buf is None or buf.size < need:
            buf = np.empty(need, dtype=np.float64)
            self._f8[key] = buf
        return buf[:need].reshape(shape)

    def boolean(self, key, shape):
        need = int(np.prod(shape))
        buf = self._b1.get(key)
        if buf is None or buf.size < need:
            buf = np.empty(need, dtype=bool)
            self._b1[key] = buf
        return buf[:need].reshape(shape)


def _score_sq_inplace(s, volf, n, tbar, vmin, vmax, scratch):
    """Turn a buffer of rectangle sums into squared contrasts, in place."""
    tmp = scratch.f8("tmp", s.shape)
    np.multiply(volf, tbar, out=tmp)
    s -= tmp
    np.square(s, out=s)
    np.subtract(n, volf, out=tmp)
    tmp *= volf
    np.maximum(tmp, 1e-300, out=tmp)
    s /= tmp
    bad = scratch.boolean("bad", s.shape)
    np.less_equal(volf, vmin, out=bad)
    bad2 = scratch.boolean("bad2", s.shape)
    np.greater_equal(volf, vmax, out=bad2)
    bad |= bad2
    s[bad] = -1.0
    return s


def _offer_chunk(best, score_sq, volf, extract):
    m = float(score_sq.max())
    if m < 0.0 or m < best.score_sq:
        return
    sel = score_sq == m
    vmin = int(volf[sel].min())
    if m == best.score_sq and best.lo is not None and vmin > best.vol:
        return
    sel &= volf == vmin
    flat = int(np.argmax(sel))  # first True in C order == lexicographic minimum
    lo, hi = extract(flat)
    best.offer(m, vmin, lo, hi)


def best_rectangle(ps: PrefixSum, lo_axes, hi_axes, vol_min: float, vol_max: float) -> tuple[Rect, float]:
    """Return the admissible (lo, hi) pair maximizing |contrast|, with its score.

    ``lo_axes[k]`` / ``hi_axes[k]`` are ascending int arrays of per-axis corner
    candidates.  Admissible pairs satisfy ``lo < hi`` coordinatewise and
    ``vol_min < volume < vol_max`` (both strict).
    """
    n = ps.size
    vmax = min(float(vol_max), float(n))
    vmin = max(float(vol_min), 0.0)
    lo_axes = [np.asarray(a, dtype=np.int64) for a in lo_axes]
    hi_axes = [np.asarray(a, dtype=np.int64) for a in hi_axes]
    if any(a.size == 0 for a in lo_axes) or any(a.size == 0 for a in hi_axes):
        raise NoAdmissibleRectError("empty candidate axis")

    best = _Best()
    if len(ps.dims) == 2:
        _scan_2d(ps, lo_axes, hi_axes, vmin, vmax, best)
    else:
        _scan_nd(ps, lo_axes, hi_axes, vmin, vmax, best)

    if best.lo is None:
        raise NoAdmissibleRectError(
            f"no candidate with volume in ({vmin}, {vmax}) and lo < hi"
        )
    if best.score_sq == 0.0:
        raise DegenerateScanError("all admissible contrasts are zero")
    return Rect(best.lo, best.hi), math.sqrt(best.score_sq)


def _scan_2d(ps, lo_axes, hi_axes, vmin, vmax, best):
    n = ps.size
    tbar = ps.total / n
    l1, l2 = lo_axes
    h1, h2 = hi_axes
    p = ps.table
    p_ll = p[np.ix_(l1, l2)]
    p_lh = p[np.ix_(l1, h2)]
    p_hl_t = np.ascontiguousarray(p[np.ix_(h1, l2)].T)  # (l2, h1)
    p_hh = p[np.ix_(h1, h2)]
    # non-positive widths zero out the volume so inverted pairs never score
    w1 = np.maximum(h1[None, :] - l1[:, None], 0).astype(np.float64)  # (l1, h1)
    w2 = np.maximum(h2[None, :] - l2[:, None], 0).astype(np.float64)  # (l2, h2)
    tail = h1.size * h2.size
    step2 = max(1, _CHUNK_ELEMS // max(tail, 1))
    step1 = max(1, _CHUNK_ELEMS // max(step2 * tail, 1))
    scratch = _Scratch()
    for s1 in range(0, l1.size, step1):
        sl1 = slice(s1, min(s1 + step1, l1.size))
        c1 = sl1.stop - sl1.start
        # hi candidates at or below the chunk's smallest lo can never pair
        b1_from = int(np.searchsorted(h1, l1[s1], side="right"))
        if b1_from >= h1.size:
            continue
        b1 = slice(b1_from, h1.size)
        nb1 = h1.size - b1_from
        for s2 in range(0, l2.size, step2):
            sl2 = slice(s2, min(s2 + step2, l2.size))
            c2 = sl2.stop - sl2.start
            b2_from = int(np.searchsorted(h2, l2[s2], side="right"))
            if b2_from >= h2.size:
                continue
            b2 = slice(b2_from, h2.size)
            shape = (c1, c2, nb1, h2.size - b2_from)
            s = scratch.f8("s", shape)
            np.subtract(p_hh[None, None, b1, b2], p_lh[sl1, None, None, b2], out=s)
            s -= p_hl_t[None, sl2, b1, None]
            s += p_ll[sl1, sl2][:, :, None, None]
            volf = scratch.f8("volf", shape)
            np.multiply(
                w1[sl1, None, b1, None], w2[None, sl2, None, b2], out=volf
            )
            score_sq = _score_sq_inplace(s, volf, n, tbar, vmin, vmax, scratch)

            def extract(flat, _shape=shape, _s1=s1, _s2=s2, _b1=b1_from, _b2=b2_from):
                a1, a2, b1i, b2i = np.unravel_index(flat, _shape)
                return (
                    (int(l1[_s1 + a1]), int(l2[_s2 + a2])),
                    (int(h1[_b1 + b1i]), int(h2[_b2 + b2i])),
                )

            _offer_chunk(best, score_sq, volf, extract)


def _scan_nd(ps, lo_axes, hi_axes, vmin, vmax, best):
    d = len(ps.dims)
    n = ps.size
    tbar = ps.total / n
    lo_grid = np.stack(np.meshgrid(*lo_axes, indexing="ij"), axis=-1).reshape(-1, d)
    hi_grid = np.stack(np.meshgrid(*hi_axes, indexing="ij"), axis=-1).reshape(-1, d)
    nh = hi_grid.shape[0]
    step = max(1, _CHUNK_ELEMS // max(nh, 1))
    corners = list(product((0, 1), repeat=d))  # 1 -> take lo on that axis
    scratch = _Scratch()
    for start in range(0, lo_grid.shape[0], step):
        lo_c = lo_grid[start : start + step]
        c = lo_c.shape[0]
        s = scratch.f8("s", (c, nh))
        s[...] = 0.0
        for mask in corners:
            idx = tuple(
                lo_c[:, k, None] if mask[k] else hi_grid[None, :, k] for k in range(d)
            )
            term = ps.table[idx]
            s += -term if sum(mask) & 1 else term
        volf = scratch.f8("volf", (c, nh))
        volf[...] = 1.0
        for k in range(d):
            volf *= np.maximum(hi_grid[None, :, k] - lo_c[:, k, None], 0)
        score_sq = _score_sq_inplace(s, volf, n, tbar, vmin, vmax, scratch)

        def extract(flat, _start=start, _c=c):
            i, j = np.unravel_index(flat, (_c, nh))
            return (
                tuple(int(x) for x in lo_grid[_start + i]),
                tuple(int(x) for x in hi_grid[j]),
            )

        _offer_chunk(best, score_sq, volf, extract)


def window_half_width(stride: int, axis_len: int, grid_size: int, d: int, kappa: float, const: float) -> int:
    """Half-width of the refinement window around a coarse corner estimate."""
    hw = math.ceil(const * stride * axis_len**kappa * math.log(grid_size) ** (1.0 / d))
    return min(max(int(hw), 1), axis_len)
