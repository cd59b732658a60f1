"""Bilateral cost aggregation over each disparity slice of a cost volume."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import SENTINEL, CostVolume, DimensionError, GrayImage, ParameterError, RowPool

# keeps every table weight strictly positive when exp() would underflow
_TINY = np.finfo(np.float64).tiny
# below this total weight a window is recomputed from log-weights
_RESCUE = 1e-200


@dataclass(frozen=True)
class SpatialWeightTable:
    """``weights[dy + rho, dx + rho] = exp(-(dx^2 + dy^2) / gamma_d^2)``."""

    rho: int
    gamma_d: float
    weights: np.ndarray
    log_weights: np.ndarray

    def __call__(self, dx: int, dy: int) -> float:
        return float(self.weights[dy + self.rho, dx + self.rho])


@dataclass(frozen=True)
class RangeWeightTable:
    """``weights[delta] = exp(-delta^2 / gamma_r^2)`` for integer delta in 0..255."""

    gamma_r: float
    weights: np.ndarray
    log_weights: np.ndarray

    def __getitem__(self, delta: int) -> float:
        return float(self.weights[delta])


def build_spatial_weights(rho_agg: int, gamma_d: float) -> SpatialWeightTable:
    if rho_agg < 0:
        raise ParameterError("rho_agg must be >= 0")
    if not gamma_d > 0:
        raise ParameterError(f"gamma_d must be positive, got {gamma_d}")
    offs = np.arange(-rho_agg, rho_agg + 1, dtype=np.float64)
    dist2 = offs[None, :] ** 2 + offs[:, None] ** 2
    lw = -dist2 / gamma_d**2
    w = np.maximum(np.exp(lw), _TINY)
    w.flags.writeable = lw.flags.writeable = False
    return SpatialWeightTable(rho=rho_agg, gamma_d=float(gamma_d), weights=w, log_weights=lw)


def build_range_weights(gamma_r: float) -> RangeWeightTable:
    if not gamma_r > 0:
        raise ParameterError(f"gamma_r must be positive, got {gamma_r}")
    delta = np.arange(256, dtype=np.float64)
    lw = -(delta**2) / gamma_r**2
    w = np.maximum(np.exp(lw), _TINY)
    w.flags.writeable = lw.flags.writeable = False
    return RangeWeightTable(gamma_r=float(gamma_r), weights=w, log_weights=lw)


@njit(nogil=True, cache=True)
def _range_index(g, g0):
    delta = int(abs(g - g0) + 0.5)
    return 255 if delta > 255 else delta


@njit(nogil=True, cache=True)
def _rescue(costs, guide, log_spatial, log_rng, v, u, k, y0, y1, x0, x1):
    # Same average with weights taken relative to the heaviest defined sample,
    # for windows whose absolute weights all underflow.
    rho = (log_spatial.shape[0] - 1) // 2
    g0 = guide[v, u]
    top = -np.inf
    for y in range(y0, y1 + 1):
        for x in range(x0, x1 + 1):
            if costs[y, x, k] != SENTINEL:
                lw = log_spatial[y - v + rho, x - u + rho] + log_rng[_range_index(guide[y, x], g0)]
                top = max(top, lw)
    if top == -np.inf:
        return SENTINEL
    num = 0.0
    den = 0.0
    for y in range(y0, y1 + 1):
        for x in range(x0, x1 + 1):
            c = costs[y, x, k]
            if c != SENTINEL:
                wgt = np.exp(log_spatial[y - v + rho, x - u + rho] + log_rng[_range_index(guide[y, x], g0)] - top)
                num += wgt * c
                den += wgt
    return num / den


# reassociation lets the d loop vectorise; per-pixel order is still fixed, so
# results do not depend on how rows are split across workers
@njit(nogil=True, cache=True, fastmath={"reassoc", "contract"})
def _bilateral_rows(costs, guide, spatial, rng, log_spatial, log_rng, out, r0, r1):
    h, w, nd = costs.shape
    rho = (spatial.shape[0] - 1) // 2
    num = np.empty(nd)
    den = np.empty(nd)
    for v in range(r0, r1):
        y0 = max(v - rho, 0)
        y1 = min(v + rho, h - 1)
        for u in range(w):
            x0 = max(u - rho, 0)
            x1 = min(u + rho, w - 1)
            g0 = guide[v, u]
            num[:] = 0.0
            den[:] = 0.0
            for y in range(y0, y1 + 1):
                for x in range(x0, x1 + 1):
                    wgt = spatial[y - v + rho, x - u + rho] * rng[_range_index(guide[y, x], g0)]
                    col = costs[y, x]
                    for k in range(nd):
                        c = col[k]
                        m = wgt if c != SENTINEL else 0.0
                        num[k] += m * c
                        den[k] += m
            for k in range(nd):
                if den[k] > _RESCUE:
                    out[v, u, k] = num[k] / den[k]
                else:
                    out[v, u, k] = _rescue(costs, guide, log_spatial, log_rng, v, u, k, y0, y1, x0, x1)


def bilateral_aggregate(
    volume: CostVolume,
    guide: GrayImage,
    spatial: SpatialWeightTable,
    range_weights: RangeWeightTable,
    workers: int = 1,
) -> CostVolume:
    """Edge-aware weighted average of each cost slice, guided by ``guide``.

    Sentinel neighbours are dropped from numerator and denominator alike and the
    window is truncated at the image border.
    """
    if guide.shape != (volume.height, volume.width):
        raise DimensionError(
            f"guide {guide.shape} does not match volume {(volume.height, volume.width)}"
        )
    out = np.empty_like(volume.costs)

    def kernel(r0, r1):
        _bilateral_rows(volume.costs, guide.data, spatial.weights, range_weights.weights,
                        spatial.log_weights, range_weights.log_weights, out, r0, r1)

    RowPool(workers).run(volume.height, kernel)
    out.flags.writeable = False
    return CostVolume(out, volume.d_min, volume.d_max)
