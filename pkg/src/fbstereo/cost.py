"""NCC matching cost, written once into twin left/right cost volumes."""
from __future__ import annotations

import numpy as np
from numba import njit
from numpy.lib.stride_tricks import sliding_window_view

from .core import (
    SENTINEL,
    SIGMA_FLOOR,
    BlockStats,
    CostVolume,
    DimensionError,
    FbsParams,
    GrayImage,
    RowPool,
)


def compute_block_stats(img: GrayImage, rho_ncc: int) -> BlockStats:
    """Mean and stddev of every full ``(2*rho_ncc + 1)**2`` block.

    Stddev uses the one-pass form sqrt(sum(i^2)/n - mean^2). Pixels whose block
    would leave the image get NaN in both rasters.
    """
    k = 2 * rho_ncc + 1
    h, w = img.shape
    if h < k or w < k:
        raise DimensionError(f"{w}x{h} image is smaller than one {k}x{k} block")
    n = k * k
    windows = sliding_window_view(img.data, (k, k))
    s1 = windows.sum(axis=(-1, -2))
    s2 = (windows * windows).sum(axis=(-1, -2))
    mu = s1 / n
    var = np.maximum(s2 / n - mu * mu, 0.0)

    mean = np.full((h, w), np.nan)
    std = np.full((h, w), np.nan)
    mean[rho_ncc:h - rho_ncc, rho_ncc:w - rho_ncc] = mu
    std[rho_ncc:h - rho_ncc, rho_ncc:w - rho_ncc] = np.sqrt(var)
    return BlockStats(mean=mean, stddev=std, rho_ncc=rho_ncc)


@njit(nogil=True, cache=True)
def _ncc_rows(il, ir, mu_l, sd_l, mu_r, sd_r, rho, d_min, d_max, left, right, r0, r1):
    h, w = il.shape
    n = (2 * rho + 1) ** 2
    n_evals = 0
    for v in range(max(r0, rho), min(r1, h - rho)):
        for u in range(rho, w - rho):
            sl = sd_l[v, u]
            if not (sl >= SIGMA_FLOOR):
                continue
            ml = mu_l[v, u]
            for d in range(d_min, d_max + 1):
                ur = u - d
                if ur - rho < 0:
                    break
                sr = sd_r[v, ur]
                if not (sr >= SIGMA_FLOOR):
                    continue
                dot = 0.0
                for y in range(v - rho, v + rho + 1):
                    for x in range(u - rho, u + rho + 1):
                        dot += il[y, x] * ir[y, x - d]
                c = (dot - n * ml * mu_r[v, ur]) / (n * sl * sr)
                if c > 1.0:
                    c = 1.0
                elif c < -1.0:
                    c = -1.0
                k = d - d_min
                left[v, u, k] = c
                right[v, ur, k] = c
                n_evals += 1
    return n_evals


def fill_cost_volumes(left, right, stats_l, stats_r, params: FbsParams, workers: int = 1):
    """Raw kernel driver; returns ``(left_costs, right_costs, n_dot_products)``."""
    if left.shape != right.shape:
        raise DimensionError(f"left {left.shape} and right {right.shape} images differ")
    if stats_l.rho_ncc != params.rho_ncc or stats_r.rho_ncc != params.rho_ncc:
        raise DimensionError("block stats were computed with a different rho_ncc")
    if stats_l.mean.shape != left.shape or stats_r.mean.shape != right.shape:
        raise DimensionError("block stats do not match the image dimensions")
    h, w = left.shape
    shape = (h, w, params.n_disp)
    lc = np.full(shape, SENTINEL)
    rc = np.full(shape, SENTINEL)

    def kernel(r0, r1):
        return _ncc_rows(
            left.data, right.data,
            stats_l.mean, stats_l.stddev, stats_r.mean, stats_r.stddev,
            params.rho_ncc, params.d_min, params.d_max, lc, rc, r0, r1,
        )

    n_evals = sum(RowPool(workers).run(h, kernel))
    return lc, rc, n_evals


def compute_cost_volumes(
    left: GrayImage,
    right: GrayImage,
    stats_l: BlockStats,
    stats_r: BlockStats,
    params: FbsParams,
    workers: int = 1,
) -> tuple[CostVolume, CostVolume]:
    """Fill both cost volumes from one NCC evaluation per (u, v, d).

    The left volume is indexed by the left pixel ``(u, v)``, the right volume by
    the matching right pixel ``(u - d, v)``, so ``right[v, u-d, d] == left[v, u, d]``.
    """
    lc, rc, _ = fill_cost_volumes(left, right, stats_l, stats_r, params, workers)
    lc.flags.writeable = False
    rc.flags.writeable = False
    return (
        CostVolume(lc, params.d_min, params.d_max),
        CostVolume(rc, params.d_min, params.d_max),
    )
