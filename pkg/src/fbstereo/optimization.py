"""Winner-take-all, left-right consistency and parabola subpixel refinement."""
from __future__ import annotations

import numpy as np
from numba import njit

from .core import INVALID, SENTINEL, CostVolume, DimensionError, DisparityMap, RowPool

DENOM_EPS = 1e-9


@njit(nogil=True, cache=True)
def _wta_rows(costs, d_min, out, r0, r1):
    h, w, nd = costs.shape
    for v in range(r0, r1):
        for u in range(w):
            best = -np.inf
            best_k = -1
            for k in range(nd):
                c = costs[v, u, k]
                # strict '>' keeps the smallest d on ties
                if c != SENTINEL and c > best:
                    best = c
                    best_k = k
            out[v, u] = d_min + best_k if best_k >= 0 else np.inf


def wta_disparity(volume: CostVolume, workers: int = 1) -> DisparityMap:
    """Per-pixel integer disparity of the highest defined cost."""
    out = np.empty((volume.height, volume.width))

    def kernel(r0, r1):
        _wta_rows(volume.costs, volume.d_min, out, r0, r1)

    RowPool(workers).run(volume.height, kernel)
    out.flags.writeable = False
    return DisparityMap(out)


def _round_half_up(x):
    return np.floor(x + 0.5)


def lrc_check(left: DisparityMap, right: DisparityMap, tolerance: float) -> DisparityMap:
    """Keep ``left(u, v)`` only where the right map points back within ``tolerance``."""
    if left.shape != right.shape:
        raise DimensionError(f"left {left.shape} and right {right.shape} maps differ")
    h, w = left.shape
    dl = left.data
    ok = left.valid
    vv, uu = np.nonzero(ok)
    ur = uu - _round_half_up(dl[vv, uu]).astype(np.int64)
    inside = (ur >= 0) & (ur < w)
    vv, uu, ur = vv[inside], uu[inside], ur[inside]
    dr = right.data[vv, ur]
    agree = np.isfinite(dr) & (np.abs(dl[vv, uu] - dr) <= tolerance)

    out = np.full((h, w), INVALID)
    out[vv[agree], uu[agree]] = dl[vv[agree], uu[agree]]
    return DisparityMap(out)


def parabola_offset(c_prev, c_mid, c_next):
    """Unclamped vertex offset of the parabola through three equally spaced costs.

    Returns NaN where the denominator is degenerate.
    """
    c_prev, c_mid, c_next = (np.asarray(c, dtype=np.float64) for c in (c_prev, c_mid, c_next))
    den = 2.0 * c_prev + 2.0 * c_next - 4.0 * c_mid
    safe = np.abs(den) >= DENOM_EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        off = np.where(safe, (c_prev - c_next) / np.where(safe, den, 1.0), np.nan)
    return off


def subpixel_refine(disp: DisparityMap, volume: CostVolume) -> DisparityMap:
    """Refine integer disparities by fitting a parabola to the neighbouring costs.

    Pixels at the ends of the disparity range, with an undefined neighbour cost
    or with a flat column keep their integer value. Offsets are clamped to +/-0.5.
    """
    if disp.shape != (volume.height, volume.width):
        raise DimensionError("disparity map and cost volume differ in size")
    out = disp.data.copy()
    vv, uu = np.nonzero(disp.valid)
    d = _round_half_up(disp.data[vv, uu]).astype(np.int64)
    inner = (d > volume.d_min) & (d < volume.d_max)
    vv, uu, d = vv[inner], uu[inner], d[inner]
    k = d - volume.d_min
    costs = volume.costs
    c_prev = costs[vv, uu, k - 1]
    c_mid = costs[vv, uu, k]
    c_next = costs[vv, uu, k + 1]
    defined = (c_prev != SENTINEL) & (c_mid != SENTINEL) & (c_next != SENTINEL)
    off = parabola_offset(c_prev, c_mid, c_next)
    use = defined & np.isfinite(off)
    out[vv[use], uu[use]] = d[use] + np.clip(off[use], -0.5, 0.5)
    return DisparityMap(out)
