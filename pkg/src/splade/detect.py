"""Multi-patch detection: block testing, component filtering, and refinement.

Pipeline: partition the lattice into blocks of side floor(n_k^alpha); test
every block mean against the max-calibrated Gaussian threshold; group flagged
blocks into connected components (split by contrast sign, so adjacent patches
with opposite jumps never merge); discard components covering too few cells;
envelope each surviving component in a margin-expanded bounding box, shrinking
pairs of envelopes until disjoint; and run the two-stage single-patch search
independently inside each envelope.

When the baseline mean or the long-run variance is estimated and a surviving
component touches the boundary calibration layer, the layer estimates are
treated as contaminated: the pipeline re-estimates both quantities on the
cells outside all flagged blocks and re-runs the first stage once.
"""

from __future__ import annotations

import math
import os
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from ._scan import NoAdmissibleRectError
from .calibrate import (
    KernelSpec,
    boundary_layer_mask,
    default_bandwidths,
    masked_lrv,
    threshold_q,
)
from .lattice import Grid, LatticeError, Rect, build_prefix_sum, rect_sum
from .single import DegenerateGridError, Stage1Params, SubsampleError, algorithm1

_FALLBACK_MIN_CELLS = 256  # below this, a masked re-estimate is too thin to trust


class DetectionError(LatticeError):
    """Invalid detector configuration or undersized grid."""


def worker_count(n_tasks: int) -> int:
    """Parallelism cap: SPLADE_THREADS when set, else the core count."""
    env = os.environ.get("SPLADE_THREADS", "")
    cap = int(env) if env.strip() else (os.cpu_count() or 1)
    return max(1, min(cap, n_tasks))


@dataclass(frozen=True)
class BlockPartition:
    """Tiling of the lattice into rectangles of side floor(n_k^alpha).

    Edge blocks are truncated to the domain, so the blocks tile the lattice
    exactly: disjoint, union covering every cell.
    """

    dims: tuple[int, ...]
    strides: tuple[int, ...]
    counts: tuple[int, ...]

    @classmethod
    def build(cls, dims, alpha: float) -> "BlockPartition":
        if not 0.0 < alpha < 1.0:
            raise DetectionError(f"alpha must be in (0, 1), got {alpha}")
        dims = tuple(int(x) for x in dims)
        strides = tuple(max(1, int(math.floor(n**alpha))) for n in dims)
        counts = tuple(-(-n // l) for n, l in zip(dims, strides))
        return cls(dims=dims, strides=strides, counts=counts)

    def edges(self, axis: int) -> np.ndarray:
        l, n, m = self.strides[axis], self.dims[axis], self.counts[axis]
        e = np.minimum(np.arange(m + 1, dtype=np.int64) * l, n)
        return e

    def block(self, index) -> Rect:
        lo = tuple(int(self.edges(k)[s]) for k, s in enumerate(index))
        hi = tuple(int(self.edges(k)[s + 1]) for k, s in enumerate(index))
        return Rect(lo, hi)

    def volumes(self) -> np.ndarray:
        widths = [np.diff(self.edges(k)) for k in range(len(self.dims))]
        out = widths[0].astype(np.int64)
        for w in widths[1:]:
            out = np.multiply.outer(out, w)
        return out

    @property
    def num_blocks(self) -> int:
        return int(np.prod(self.counts))


def block_means(grid: Grid, part: BlockPartition) -> np.ndarray:
    """Mean over each (possibly truncated) block, via the prefix table."""
    ps = build_prefix_sum(grid)
    sub = ps.table[np.ix_(*(part.edges(k) for k in range(grid.ndim)))]
    sums = sub
    for ax in range(grid.ndim):
        head = [slice(None)] * grid.ndim
        tail = [slice(None)] * grid.ndim
        head[ax] = slice(1, None)
        tail[ax] = slice(None, -1)
        sums = sums[tuple(head)] - sums[tuple(tail)]
    return sums / part.volumes()


def flag_blocks(means: np.ndarray, q, mu0: float) -> np.ndarray:
    """Blocks whose centered mean exceeds the threshold: |mean - mu0| > q.

    ``q`` may be a scalar or an array broadcast over the block lattice (needed
    when truncated edge blocks get their own volume-matched threshold).
    """
    if np.any(np.asarray(q) < 0.0):
        raise DetectionError("threshold must be >= 0")
    return np.abs(means - mu0) > q


def _neighbor_offsets(d: int, connectivity: str):
    if connectivity == "faces":
        offs = []
        for k in range(d):
            for s in (-1, 1):
                o = [0] * d
                o[k] = s
                offs.append(tuple(o))
        return offs
    if connectivity == "faces+corners":
        return [o for o in product((-1, 0, 1), repeat=d) if any(o)]
    raise DetectionError(f"unknown connectivity {connectivity!r}")


def components(mask: np.ndarray, part: BlockPartition, min_cells: int, connectivity: str = "faces"):
    """Connected components of the flagged-block graph, small ones discarded.

    A component survives when the total cell count covered by its blocks
    exceeds ``min_cells``.  Returns components as sorted tuples of block
    multi-indices, ordered by their smallest member.
    """
    offsets = _neighbor_offsets(mask.ndim, connectivity)
    vols = part.volumes()
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for start in np.argwhere(mask):
        start = tuple(int(x) for x in start)
        if seen[start]:
            continue
        seen[start] = True
        comp = [start]
        queue = deque([start])
        while queue:
            cur = queue.popleft()
            for off in offsets:
                nxt = tuple(c + o for c, o in zip(cur, off))
                if any(not 0 <= x < m for x, m in zip(nxt, mask.shape)):
                    continue
                if mask[nxt] and not seen[nxt]:
                    seen[nxt] = True
                    comp.append(nxt)
                    queue.append(nxt)
        covered = int(sum(vols[c] for c in comp))
        if covered > min_cells:
            comps.append(tuple(sorted(comp)))
    comps.sort()
    return comps


def component_bbox(comp, part: BlockPartition) -> Rect:
    d = len(part.dims)
    lo = tuple(int(part.edges(k)[min(c[k] for c in comp)]) for k in range(d))
    hi = tuple(int(part.edges(k)[max(c[k] for c in comp) + 1]) for k in range(d))
    return Rect(lo, hi)


def envelope(comp, part: BlockPartition, margin_blocks: int, dims) -> Rect:
    """Bounding box of the component's cells, expanded by whole blocks per side."""
    if not comp:
        raise DetectionError("empty component has no envelope")
    if margin_blocks < 0:
        raise DetectionError("margin_blocks must be >= 0")
    bbox = component_bbox(comp, part)
    lo = tuple(
        max(0, b - margin_blocks * l) for b, l in zip(bbox.lo, part.strides)
    )
    hi = tuple(
        min(n, b + margin_blocks * l)
        for b, l, n in zip(bbox.hi, part.strides, dims)
    )
    return Rect(lo, hi)


def _shrink_pair(a: Rect, b: Rect, bbox_a: Rect, bbox_b: Rect) -> tuple[Rect, Rect]:
    """Shrink two overlapping envelopes symmetrically along one axis.

    The axis with the smallest overlap is cut; each envelope keeps its own
    component bounding box when possible, and only cuts into it if the boxes
    themselves overlap.
    """
    overlap = a.intersect(b)
    extents = [h - l for l, h in zip(overlap.lo, overlap.hi)]
    ax = int(np.argmin(extents))
    need = extents[ax]
    first, second = (a, b) if a.lo[ax] <= b.lo[ax] else (b, a)
    fb, sb = (bbox_a, bbox_b) if first is a else (bbox_b, bbox_a)

    give_first = min((need + 1) // 2, max(0, first.hi[ax] - fb.hi[ax]))
    give_second = min(need - give_first, max(0, sb.lo[ax] - second.lo[ax]))
    rem = need - give_first - give_second
    if rem > 0:  # bounding boxes themselves overlap: cut into them evenly
        give_first += (rem + 1) // 2
        give_second += rem - (rem + 1) // 2

    def cut_hi(r: Rect, amount: int) -> Rect:
        hi = list(r.hi)
        hi[ax] = max(r.lo[ax], hi[ax] - amount)
        return Rect(r.lo, tuple(hi))

    def cut_lo(r: Rect, amount: int) -> Rect:
        lo = list(r.lo)
        lo[ax] = min(r.hi[ax], lo[ax] + amount)
        return Rect(tuple(lo), r.hi)

    first, second = cut_hi(first, give_first), cut_lo(second, give_second)
    return (first, second) if a.lo[ax] <= b.lo[ax] else (second, first)


def resolve_envelope_overlaps(envelopes, bboxes):
    """Pairwise-shrink envelopes until all are disjoint (order-deterministic)."""
    envs = list(envelopes)
    for _ in range(64):
        changed = False
        for i in range(len(envs)):
            for j in range(i + 1, len(envs)):
                if envs[i].is_empty or envs[j].is_empty:
                    continue
                if not envs[i].intersect(envs[j]).is_empty:
                    envs[i], envs[j] = _shrink_pair(
                        envs[i], envs[j], bboxes[i], bboxes[j]
                    )
                    changed = True
        if not changed:
            return envs
    raise DetectionError("failed to separate envelopes")  # pragma: no cover


@dataclass(frozen=True)
class SpladeConfig:
    """All tuning for the detector; None for mu0/sigma means estimate them."""

    alpha: float = 0.5
    kappa_level: float = 0.05
    stage2: Stage1Params = Stage1Params(alpha=0.5, kappa=0.01, window_const=1.0)
    envelope_margin_blocks: int = 2
    min_size_factor: float = 1.0
    mu0: float | None = None
    sigma: float | None = None
    connectivity: str = "faces"
    boundary_beta: float = 0.7
    kernel: KernelSpec | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DetectionError(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0.0 < self.kappa_level < 1.0:
            raise DetectionError("kappa_level must be in (0, 1)")
        if self.min_size_factor <= 0.0:
            raise DetectionError("min_size_factor must be > 0")
        if self.envelope_margin_blocks < 0:
            raise DetectionError("envelope_margin_blocks must be >= 0")
        _neighbor_offsets(1, self.connectivity)


@dataclass(frozen=True)
class Detection:
    """Estimated patch count and rectangles, with per-patch mean contrasts."""

    k_hat: int
    patches: tuple[Rect, ...]
    jumps: tuple[float, ...]
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.k_hat != len(self.patches) or len(self.jumps) != len(self.patches):
            raise DetectionError("k_hat and patch/jump lengths disagree")


def min_component_cells(n: int, alpha: float, factor: float) -> int:
    """Survival threshold for component cell counts: factor * n^alpha * sqrt(ln n)."""
    return int(math.ceil(factor * n**alpha * math.sqrt(math.log(n))))


def _block_thresholds(sigma: float, part: BlockPartition, kappa_level: float):
    vols = part.volumes()
    if sigma == 0.0:
        return np.zeros_like(vols, dtype=np.float64)
    q = np.empty(vols.shape, dtype=np.float64)
    for v in np.unique(vols):
        q[vols == v] = threshold_q(sigma, float(v), part.num_blocks, kappa_level)
    return q


def _first_stage(grid, part, mu0, sigma, cfg, min_cells):
    means = block_means(grid, part)
    q = _block_thresholds(sigma, part, cfg.kappa_level)
    # floor at machine-noise scale so ulp residue (e.g. from baseline
    # subtraction) never reads as signal when sigma-hat collapses to ~0
    scale = float(np.max(np.abs(grid.data - mu0)))
    q = np.maximum(q, 64.0 * np.finfo(np.float64).eps * scale)
    pos = (means - mu0) > q
    neg = (mu0 - means) > q
    comps = components(pos, part, min_cells, cfg.connectivity) + components(
        neg, part, min_cells, cfg.connectivity
    )
    comps.sort()
    return means, q, pos | neg, comps


def _touches_layer(comp, part: BlockPartition, beta: float) -> bool:
    for k, n in enumerate(part.dims):
        t = n**beta
        for c in comp:
            b = part.block(c)
            if b.lo[k] + 1 <= t or b.hi[k] >= n - t + 1.0:
                return True
    return False


def _blocks_cell_mask(flags: np.ndarray, part: BlockPartition) -> np.ndarray:
    """Expand a block-level boolean mask to cell level."""
    out = np.zeros(part.dims, dtype=bool)
    for idx in np.argwhere(flags):
        out[part.block(tuple(int(x) for x in idx)).slices()] = True
    return out


def splade_detect(grid: Grid, cfg: SpladeConfig | None = None) -> Detection:
    """Run the full pipeline and return the detected patches.

    Deterministic given (grid, cfg); repeated calls are identical.
    """
    if cfg is None:
        cfg = SpladeConfig()
    part = BlockPartition.build(grid.dims, cfg.alpha)
    if any(m < 4 for m in part.counts):
        raise DetectionError(
            f"grid needs >= 4 blocks per axis at alpha={cfg.alpha}, got {part.counts}"
        )
    kernel = cfg.kernel or KernelSpec("bartlett", default_bandwidths(grid.dims))
    n = grid.size
    min_cells = min_component_cells(n, cfg.alpha, cfg.min_size_factor)

    estimated = cfg.mu0 is None or cfg.sigma is None
    lrv_clamped = False
    if cfg.mu0 is None or cfg.sigma is None:
        layer = boundary_layer_mask(grid.dims, cfg.boundary_beta)
        mu0 = float(grid.data[layer].mean()) if cfg.mu0 is None else cfg.mu0
        if cfg.sigma is None:
            sigma2, lrv_clamped = masked_lrv(grid.data, layer, kernel)
            sigma = math.sqrt(max(sigma2, 0.0))
        else:
            sigma = cfg.sigma
    else:
        mu0, sigma = cfg.mu0, cfg.sigma
    if sigma < 0.0:
        raise DetectionError("sigma must be >= 0")

    _, _, flags, comps = _first_stage(grid, part, mu0, sigma, cfg, min_cells)

    fallback = False
    if estimated and any(_touches_layer(c, part, cfg.boundary_beta) for c in comps):
        # Anomalies reach into the calibration layer: re-estimate on the cells
        # outside every flagged block, then redo the first stage once.
        fallback = True
        clean = ~_blocks_cell_mask(flags, part)
        clean_count = int(clean.sum())
        if cfg.mu0 is None:
            mu0 = float(
                np.median(grid.data[clean] if clean_count >= _FALLBACK_MIN_CELLS else grid.data)
            )
        if cfg.sigma is None and clean_count >= _FALLBACK_MIN_CELLS:
            sigma2, lrv_clamped = masked_lrv(grid.data, clean, kernel)
            sigma = math.sqrt(max(sigma2, 0.0))
        _, _, flags, comps = _first_stage(grid, part, mu0, sigma, cfg, min_cells)

    bboxes = [component_bbox(c, part) for c in comps]
    envs = [envelope(c, part, cfg.envelope_margin_blocks, grid.dims) for c in comps]
    envs = resolve_envelope_overlaps(envs, bboxes)

    def refine(item):
        bbox, env = item
        if env.is_empty:
            return None, True
        sub = Grid.from_array(grid.data[env.slices()].copy())
        try:
            return algorithm1(sub, cfg.stage2).shift(env.lo), False
        except (SubsampleError, DegenerateGridError, NoAdmissibleRectError):
            clipped = bbox.intersect(env)
            return (None if clipped.is_empty else clipped), True

    items = list(zip(bboxes, envs))
    workers = worker_count(len(items))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            refined = list(pool.map(refine, items))
    else:
        refined = [refine(it) for it in items]
    degenerate = sum(flag for _, flag in refined)
    patches = [r for r, _ in refined if r is not None]

    patches.sort(key=lambda r: (r.lo, r.hi))
    ps = build_prefix_sum(grid)
    jumps = tuple(rect_sum(ps, r) / r.volume() - mu0 for r in patches)

    interior_vol = int(np.prod(part.strides))
    diagnostics = {
        "mu0": mu0,
        "sigma": sigma,
        "q": (
            threshold_q(sigma, interior_vol, part.num_blocks, cfg.kappa_level)
            if sigma > 0.0
            else 0.0
        ),
        "flagged_blocks": int(flags.sum()),
        "component_cells": [
            int(sum(part.volumes()[c] for c in comp)) for comp in comps
        ],
        "fallback": fallback,
        "lrv_clamped": lrv_clamped,
        "degenerate_envelopes": degenerate,
    }
    return Detection(
        k_hat=len(patches),
        patches=tuple(patches),
        jumps=jumps,
        diagnostics=diagnostics,
    )
