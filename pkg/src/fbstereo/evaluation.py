"""Accuracy (percentage of error pixels) and throughput (Mde/s) metrics."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import DimensionError, DisparityMap, EvaluationError, ParameterError

REGIONS = ("all", "non_occ", "non_occ_textl", "non_occ_discont")


@dataclass(frozen=True)
class RegionMask:
    include: np.ndarray
    label: str

    def __post_init__(self):
        if self.label not in REGIONS:
            raise ParameterError(f"unknown region {self.label!r}, expected one of {REGIONS}")
        inc = np.ascontiguousarray(self.include, dtype=bool)
        if inc.ndim != 2:
            raise DimensionError("region mask must be 2-D")
        inc = inc.copy()
        inc.flags.writeable = False
        object.__setattr__(self, "include", inc)

    @property
    def shape(self):
        return self.include.shape

    @property
    def count(self) -> int:
        return int(self.include.sum())

    @classmethod
    def everywhere(cls, gt: DisparityMap) -> "RegionMask":
        return cls(gt.valid, "all")

    def restricted_to(self, gt: DisparityMap) -> "RegionMask":
        if gt.shape != self.shape:
            raise DimensionError(f"mask {self.shape} does not match ground truth {gt.shape}")
        return replace(self, include=self.include & gt.valid)


@dataclass(frozen=True)
class EvalReport:
    e_pep: float
    n: int
    region: str
    n_errors: int = 0
    params: dict = field(default_factory=dict)
    runtime_seconds: float = float("nan")
    mde_per_s: float = float("nan")

    def __post_init__(self):
        if self.n <= 0:
            raise EvaluationError("a report needs at least one evaluated pixel")
        if not (0.0 <= self.e_pep <= 100.0):
            raise EvaluationError(f"e_pep {self.e_pep} outside [0, 100]")


def compute_pep(
    est: DisparityMap,
    gt: DisparityMap,
    mask: RegionMask,
    epsilon_d: float,
    count_invalid_as_error: bool = True,
) -> EvalReport:
    """Percentage of masked pixels whose absolute error is strictly above ``epsilon_d``.

    Ground-truth-invalid pixels are always excluded. Invalid estimates count as
    errors unless ``count_invalid_as_error`` is False, in which case they are
    dropped from the evaluated set.
    """
    if est.shape != gt.shape or mask.shape != gt.shape:
        raise DimensionError(
            f"shape mismatch: est {est.shape}, gt {gt.shape}, mask {mask.shape}"
        )
    include = mask.include & gt.valid
    if not count_invalid_as_error:
        include &= est.valid
    n = int(include.sum())
    if n == 0:
        raise EvaluationError(f"region {mask.label!r} selects no pixels")
    with np.errstate(invalid="ignore"):
        err = np.abs(est.data[include] - gt.data[include])
    # inf error for invalid estimates is > any finite epsilon
    n_bad = int(np.count_nonzero(err > epsilon_d))
    return EvalReport(e_pep=100.0 * n_bad / n, n=n, region=mask.label, n_errors=n_bad)


def compute_mde_s(width: int, height: int, d_max: int, t: float) -> float:
    if not t > 0:
        raise ParameterError(f"runtime must be positive, got {t}")
    return width * height * d_max / t * 1e-6


def load_region_mask(path, label: str, gt: DisparityMap | None = None) -> RegionMask:
    """Read an 8-bit mask raster (nonzero = included).

    With ``gt`` given, the dimensions are checked and gt-invalid pixels dropped.
    """
    from .dataset_io import read_netpbm

    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"mask file not found: {path}")
    raster = read_netpbm(path)
    if raster.ndim == 3:
        raster = raster.max(axis=2)
    mask = RegionMask(raster != 0, label)
    if gt is not None:
        mask = mask.restricted_to(gt)
    return mask
