"""Shared domain types, sentinels and storage layout for the stereo pipeline.

Every raster is a read-only C-contiguous numpy array. Cost volumes are laid
out as ``(height, width, n_disp)`` so that the disparity column of a pixel is
contiguous in memory, which keeps WTA and subpixel reads cache-local.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

#: Marker for an undefined cost entry, strictly below the NCC range [-1, 1].
SENTINEL = -2.0
#: Marker for a rejected or undefined disparity.
INVALID = math.inf
#: Stddev below which a block is treated as textureless.
SIGMA_FLOOR = 1e-6


class StereoError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(StereoError, ValueError):
    pass


class ParameterError(StereoError, ValueError):
    pass


class EvaluationError(StereoError, ValueError):
    pass


def _frozen(a, dtype=np.float64) -> np.ndarray:
    arr = np.ascontiguousarray(a, dtype=dtype)
    # already-frozen inputs are shared, anything writeable is copied
    if arr is a and arr.flags.writeable:
        arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class GrayImage:
    """Single-channel intensity raster, ``data[v, u]`` in [0, 255]."""

    data: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.data)
        if arr.ndim != 2 or arr.size == 0:
            raise DimensionError(f"expected a non-empty 2-D raster, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 255.0:
            raise ParameterError("intensities must be finite and within [0, 255]")
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class BlockStats:
    """Per-pixel block mean and stddev; NaN where the block leaves the image."""

    mean: np.ndarray
    stddev: np.ndarray
    rho_ncc: int

    def __post_init__(self):
        mean = _frozen(self.mean)
        std = _frozen(self.stddev)
        if mean.shape != std.shape:
            raise DimensionError("mean and stddev rasters differ in shape")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "stddev", std)

    @property
    def defined(self) -> np.ndarray:
        return np.isfinite(self.mean)

    @property
    def n(self) -> int:
        return (2 * self.rho_ncc + 1) ** 2


@dataclass(frozen=True)
class CostVolume:
    """Dense cost volume, ``costs[v, u, d - d_min]``; undefined entries hold SENTINEL."""

    costs: np.ndarray
    d_min: int
    d_max: int

    def __post_init__(self):
        costs = _frozen(self.costs)
        if costs.ndim != 3:
            raise DimensionError(f"cost volume must be 3-D, got shape {costs.shape}")
        if not (0 <= self.d_min < self.d_max):
            raise ParameterError(f"need 0 <= d_min < d_max, got {self.d_min}, {self.d_max}")
        if costs.shape[2] != self.n_disp:
            raise DimensionError(
                f"disparity axis has {costs.shape[2]} slices, range needs {self.n_disp}"
            )
        object.__setattr__(self, "costs", costs)

    @property
    def width(self) -> int:
        return self.costs.shape[1]

    @property
    def height(self) -> int:
        return self.costs.shape[0]

    @property
    def n_disp(self) -> int:
        return self.d_max - self.d_min + 1

    @property
    def defined(self) -> np.ndarray:
        return self.costs != SENTINEL

    def at(self, u: int, v: int, d: int) -> float:
        return float(self.costs.reshape(-1)[cost_volume_index(u, v, d, self.width, self.d_min, self.d_max)])


@dataclass(frozen=True)
class DisparityMap:
    """Real-valued disparity raster; rejected pixels hold INVALID (+inf)."""

    data: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.data)
        if arr.ndim != 2:
            raise DimensionError(f"disparity map must be 2-D, got shape {arr.shape}")
        if np.isnan(arr).any():
            raise ParameterError("NaN is not a legal disparity; use INVALID")
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.data)


@dataclass(frozen=True)
class FbsParams:
    rho_ncc: int = 1
    rho_agg: int = 6
    # grid minimum on Cones, see configs/cones_gamma_grid.csv
    gamma_d: float = 6.0
    gamma_r: float = 50.0
    d_min: int = 0
    d_max: int = 59
    epsilon_d: float = 2.0
    lrc_tolerance: float = 1.0

    def __post_init__(self):
        if self.rho_ncc < 1:
            raise ParameterError("rho_ncc must be >= 1")
        if self.rho_agg < 0:
            raise ParameterError("rho_agg must be >= 0")
        if not (self.gamma_d > 0 and self.gamma_r > 0):
            raise ParameterError("gamma_d and gamma_r must be positive")
        if not (0 <= self.d_min < self.d_max):
            raise ParameterError("need 0 <= d_min < d_max")
        if self.epsilon_d < 0 or self.lrc_tolerance < 0:
            raise ParameterError("epsilon_d and lrc_tolerance must be non-negative")

    @property
    def n_ncc(self) -> int:
        return (2 * self.rho_ncc + 1) ** 2

    @property
    def n_disp(self) -> int:
        return self.d_max - self.d_min + 1

    def as_dict(self) -> dict:
        return asdict(self)


def cost_volume_index(u: int, v: int, d: int, width: int, d_min: int, d_max: int) -> int:
    n_disp = d_max - d_min + 1
    return (v * width + u) * n_disp + (d - d_min)


def cost_volume_unindex(index: int, width: int, d_min: int, d_max: int) -> tuple[int, int, int]:
    n_disp = d_max - d_min + 1
    pixel, k = divmod(index, n_disp)
    v, u = divmod(pixel, width)
    return u, v, k + d_min


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=np.float64)
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


@dataclass
class RowPool:
    """Splits ``range(height)`` into contiguous bands and runs a nogil kernel per band.

    Bands are disjoint, so results do not depend on the worker count.
    """

    workers: int = 1
    _bands_per_worker: int = field(default=4, repr=False)

    def __post_init__(self):
        if self.workers < 1:
            raise ParameterError("worker count must be >= 1")

    def bands(self, height: int) -> list[tuple[int, int]]:
        n = 1 if self.workers == 1 else min(height, self.workers * self._bands_per_worker)
        edges = np.linspace(0, height, n + 1).round().astype(int)
        return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]

    def run(self, height: int, kernel: Callable[[int, int], object]) -> list:
        bands = self.bands(height)
        if self.workers == 1:
            return [kernel(a, b) for a, b in bands]
        with ThreadPoolExecutor(max_workers=self.workers) as ex:
            futures = [ex.submit(kernel, a, b) for a, b in bands]
            return [f.result() for f in futures]
