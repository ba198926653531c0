"""Data-driven baseline and scale calibration for the detector.

The baseline mean and the long-run variance are estimated on a boundary layer
of thickness n_k^beta along every face of the domain, which is assumed free of
anomalies.  The long-run variance uses a product-kernel HAC estimator over
that layer; the first-stage flag threshold is the exact closed-form quantile
of the maximum absolute normalized Gaussian block increment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from statistics import NormalDist

import numpy as np

from .lattice import Grid, LatticeError

_NORMAL = NormalDist()


class CalibrationError(LatticeError):
    """Degenerate layer, kernel, or threshold domain."""


@dataclass(frozen=True)
class KernelSpec:
    """Symmetric compactly supported product kernel with K(0) = 1."""

    kind: str = "bartlett"
    bandwidths: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("bartlett", "parzen"):
            raise CalibrationError(f"unknown kernel {self.kind!r}")
        bw = tuple(float(b) for b in self.bandwidths)
        if any(b < 1.0 for b in bw):
            raise CalibrationError(f"bandwidths must be >= 1, got {bw}")
        object.__setattr__(self, "bandwidths", bw)

    def weight1d(self, x: float) -> float:
        ax = abs(x)
        if ax >= 1.0:
            return 0.0
        if self.kind == "bartlett":
            return 1.0 - ax
        if ax <= 0.5:
            return 1.0 - 6.0 * ax**2 + 6.0 * ax**3
        return 2.0 * (1.0 - ax) ** 3


def default_bandwidths(dims) -> tuple[float, ...]:
    """HAC-style compromise: B_k = ceil(n_k^(1/2d)) grows but stays o(n_k^(1/d))."""
    d = len(dims)
    return tuple(float(math.ceil(n ** (1.0 / (2 * d)))) for n in dims)


def boundary_layer_mask(dims, beta: float) -> np.ndarray:
    """Cells with some 1-based coordinate i_k <= n_k^beta or >= n_k - n_k^beta + 1."""
    if not 0.0 < beta < 1.0:
        raise CalibrationError(f"beta must be in (0, 1), got {beta}")
    mask = np.zeros(dims, dtype=bool)
    for k, n in enumerate(dims):
        t = n**beta
        coord = np.arange(1, n + 1, dtype=np.float64)
        line = (coord <= t) | (coord >= n - t + 1.0)
        shape = [1] * len(dims)
        shape[k] = n
        mask |= line.reshape(shape)
    if not mask.any():
        raise CalibrationError(f"beta={beta} yields an empty boundary layer")
    return mask


def estimate_mu0(grid: Grid, beta: float = 0.7) -> float:
    """Sample mean over the boundary layer."""
    mask = boundary_layer_mask(grid.dims, beta)
    return float(grid.data[mask].mean())


def masked_lrv(data: np.ndarray, mask: np.ndarray, kernel: KernelSpec) -> tuple[float, bool]:
    """Kernel long-run variance over the masked cells.

    Returns (estimate, clamped): the double sum over cell pairs within the
    kernel support, normalized by the masked cell count; a negative raw value
    is clamped to the plain masked variance and flagged.
    """
    count = int(mask.sum())
    if count == 0:
        raise CalibrationError("empty estimation region")
    d = data.ndim
    bw = kernel.bandwidths
    if len(bw) != d:
        raise CalibrationError(f"need {d} bandwidths, got {len(bw)}")
    centered = np.where(mask, data - data[mask].mean(), 0.0)

    lag_ranges = [range(-int(math.ceil(b)) + 1, int(math.ceil(b))) for b in bw]
    total = 0.0
    for lag in product(*lag_ranges):
        if lag > tuple([0] * d):
            continue  # add symmetric partner instead
        w = 1.0
        for k in range(d):
            w *= kernel.weight1d(lag[k] / bw[k])
        if w == 0.0:
            continue
        src = []
        dst = []
        ok = True
        for k, h in enumerate(lag):
            n = data.shape[k]
            if abs(h) >= n:
                ok = False
                break
            if h <= 0:
                src.append(slice(-h, n))
                dst.append(slice(0, n + h))
            else:
                src.append(slice(0, n - h))
                dst.append(slice(h, n))
        if not ok:
            continue
        term = float(np.sum(centered[tuple(src)] * centered[tuple(dst)]))
        total += w * term if lag == tuple([0] * d) else 2.0 * w * term

    sigma2 = total / count
    if sigma2 < 0.0:
        return float(np.sum(centered[mask] ** 2) / count), True
    return sigma2, False


def estimate_lrv(grid: Grid, beta: float = 0.7, kernel: KernelSpec | None = None) -> float:
    """Long-run variance estimated on the boundary layer."""
    if kernel is None:
        kernel = KernelSpec("bartlett", default_bandwidths(grid.dims))
    mask = boundary_layer_mask(grid.dims, beta)
    sigma2, _ = masked_lrv(grid.data, mask, kernel)
    return sigma2


def threshold_q(sigma: float, block_volume: float, num_blocks: int, kappa_level: float) -> float:
    """(1 - kappa)-quantile of the max absolute normalized block increment.

    Increments of a Brownian sheet over disjoint blocks are independent
    N(0, volume), so the normalized statistic per block is sigma*|Z|/sqrt(v)
    and the max quantile has the exact closed form
    sigma / sqrt(v) * PhiInv((1 + (1 - kappa)^(1/M)) / 2).
    """
    if sigma <= 0.0:
        raise CalibrationError(f"sigma must be > 0, got {sigma}")
    if block_volume < 1.0:
        raise CalibrationError(f"block volume must be >= 1, got {block_volume}")
    if num_blocks < 1:
        raise CalibrationError(f"num_blocks must be >= 1, got {num_blocks}")
    if not 0.0 < kappa_level < 1.0:
        raise CalibrationError(f"kappa_level must be in (0, 1), got {kappa_level}")
    p = (1.0 + (1.0 - kappa_level) ** (1.0 / num_blocks)) / 2.0
    return sigma / math.sqrt(block_volume) * _NORMAL.inv_cdf(p)


def empirical_variogram(grid: Grid, axis: int, max_lag: int) -> tuple[float, np.ndarray]:
    """Semivariogram along one axis: gamma(h) = mean squared lag-h increment / 2.

    Returns (gamma0, gammas) where gamma0 is the sample-variance sill proxy and
    gammas[h-1] covers h = 1..max_lag.
    """
    if not 0 <= axis < grid.ndim:
        raise CalibrationError(f"axis {axis} out of range for {grid.ndim}-d grid")
    if not 0 < max_lag < grid.dims[axis]:
        raise CalibrationError(f"max_lag must be in (0, {grid.dims[axis]})")
    x = grid.data
    gammas = np.empty(max_lag, dtype=np.float64)
    for h in range(1, max_lag + 1):
        a = [slice(None)] * grid.ndim
        b = [slice(None)] * grid.ndim
        a[axis] = slice(h, None)
        b[axis] = slice(None, -h)
        diff = x[tuple(a)] - x[tuple(b)]
        gammas[h - 1] = 0.5 * float(np.mean(diff**2))
    return float(np.var(x)), gammas
