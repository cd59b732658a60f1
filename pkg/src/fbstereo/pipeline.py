"""End-to-end runner: cost -> aggregation -> WTA (both sides) -> LRC -> subpixel."""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from statistics import median

import numpy as np

from .aggregation import bilateral_aggregate, build_range_weights, build_spatial_weights
from .core import DisparityMap, FbsParams, GrayImage, ParameterError, StereoError
from .cost import compute_block_stats, compute_cost_volumes
from .dataset_io import (
    DatasetSpec,
    load_ground_truth,
    load_image,
    load_manifest,
    parse_key_values,
    write_disparity,
    write_netpbm,
)
from .evaluation import EvalReport, RegionMask, compute_mde_s, compute_pep, load_region_mask
from .optimization import lrc_check, subpixel_refine, wta_disparity

log = logging.getLogger(__name__)

SWEEP_AXES = ("gamma_d", "gamma_r", "rho_agg")
STAGES = ("stats", "cost", "aggregation", "wta", "lrc", "subpixel")
CSV_FIELDS = (
    ["dataset", *(f.name for f in fields(FbsParams)), "aggregate", "lrc", "subpixel", "workers",
     "region", "n", "n_errors", "e_pep", "t_total"]
    + [f"t_{s}" for s in STAGES]
    + ["mde_per_s", "error"]
)


class PipelineError(StereoError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class RunConfig:
    dataset: Path
    params: FbsParams = field(default_factory=FbsParams)
    aggregate: bool = True
    lrc: bool = True
    subpixel: bool = True
    workers: int = 1
    out_dir: Path | None = None
    repeat: int = 5
    count_invalid_as_error: bool = True
    sweep_axis: str | None = None
    sweep_values: tuple = ()

    def __post_init__(self):
        if self.workers < 1:
            raise ParameterError("worker count must be >= 1")
        if self.repeat < 1:
            raise ParameterError("repeat must be >= 1")
        if self.sweep_axis is not None:
            if self.sweep_axis not in SWEEP_AXES:
                raise ParameterError(f"sweep axis must be one of {SWEEP_AXES}")
            vals = tuple(self.sweep_values)
            if not vals or any(v <= 0 for v in vals) or list(vals) != sorted(vals):
                raise ParameterError("sweep values must be non-empty, positive and sorted")

    def to_text(self) -> str:
        kv = {"dataset": str(self.dataset), **self.params.as_dict(),
              "aggregate": self.aggregate, "lrc": self.lrc, "subpixel": self.subpixel,
              "workers": self.workers, "repeat": self.repeat,
              "count_invalid_as_error": self.count_invalid_as_error}
        if self.sweep_axis:
            kv["sweep"] = f"{self.sweep_axis}=" + ",".join(_fmt(v) for v in self.sweep_values)
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in kv.items())

    @classmethod
    def from_text(cls, text: str, **overrides) -> "RunConfig":
        kv = parse_key_values(text)
        pkw = {}
        for f in fields(FbsParams):
            if f.name in kv:
                pkw[f.name] = int(kv[f.name]) if f.type in ("int", int) else float(kv[f.name])
        cfg = dict(
            dataset=Path(kv["dataset"]),
            params=FbsParams(**pkw),
            aggregate=_bool(kv.get("aggregate", "true")),
            lrc=_bool(kv.get("lrc", "true")),
            subpixel=_bool(kv.get("subpixel", "true")),
            workers=int(kv.get("workers", 1)),
            repeat=int(kv.get("repeat", 5)),
            count_invalid_as_error=_bool(kv.get("count_invalid_as_error", "true")),
        )
        if "sweep" in kv:
            cfg["sweep_axis"], cfg["sweep_values"] = parse_sweep(kv["sweep"])
        cfg.update(overrides)
        return cls(**cfg)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def _bool(s: str) -> bool:
    s = s.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ParameterError(f"not a boolean: {s!r}")


def parse_sweep(text: str) -> tuple[str, tuple]:
    """``"rho_agg=1,2,3"`` -> ``("rho_agg", (1, 2, 3))``."""
    axis, _, values = text.partition("=")
    axis = axis.strip().replace("-", "_")
    axis = {"rho": "rho_agg", "gammad": "gamma_d", "gammar": "gamma_r"}.get(axis, axis)
    if axis not in SWEEP_AXES:
        raise ParameterError(f"unknown sweep axis {axis!r}, expected one of {SWEEP_AXES}")
    conv = int if axis == "rho_agg" else float
    try:
        vals = tuple(conv(v) for v in values.split(",") if v.strip())
    except ValueError as exc:
        raise ParameterError(f"bad sweep values {values!r}") from exc
    return axis, vals


@dataclass
class StereoResult:
    disparity: DisparityMap
    left_wta: DisparityMap
    right_wta: DisparityMap
    lrc_mask: np.ndarray
    stage_times: dict[str, float]

    @property
    def t_total(self) -> float:
        return sum(self.stage_times.values())


def estimate_disparity(
    left: GrayImage,
    right: GrayImage,
    params: FbsParams,
    *,
    aggregate: bool = True,
    lrc: bool = True,
    subpixel: bool = True,
    workers: int = 1,
) -> StereoResult:
    """Run the compute stages only; no file I/O happens in here."""
    times = {}
    clock = time.perf_counter

    def stage(name, fn, *args, **kw):
        t0 = clock()
        try:
            out = fn(*args, **kw)
        except StereoError as exc:
            raise PipelineError(name, exc) from exc
        except (ValueError, MemoryError) as exc:
            raise PipelineError(name, exc) from exc
        times[name] = times.get(name, 0.0) + clock() - t0
        return out

    sl = stage("stats", compute_block_stats, left, params.rho_ncc)
    sr = stage("stats", compute_block_stats, right, params.rho_ncc)
    vol_l, vol_r = stage("cost", compute_cost_volumes, left, right, sl, sr, params, workers=workers)
    if aggregate:
        spatial = stage("aggregation", build_spatial_weights, params.rho_agg, params.gamma_d)
        rng = stage("aggregation", build_range_weights, params.gamma_r)
        vol_l = stage("aggregation", bilateral_aggregate, vol_l, left, spatial, rng, workers=workers)
        vol_r = stage("aggregation", bilateral_aggregate, vol_r, right, spatial, rng, workers=workers)
    else:
        times["aggregation"] = 0.0
    disp_l = stage("wta", wta_disparity, vol_l, workers=workers)
    disp_r = stage("wta", wta_disparity, vol_r, workers=workers)
    disp = disp_l
    if lrc:
        disp = stage("lrc", lrc_check, disp_l, disp_r, params.lrc_tolerance)
    else:
        times["lrc"] = 0.0
    mask = disp.valid.copy()
    if subpixel:
        disp = stage("subpixel", subpixel_refine, disp, vol_l)
    else:
        times["subpixel"] = 0.0
    return StereoResult(disp, disp_l, disp_r, mask, {s: times.get(s, 0.0) for s in STAGES})


_warm = False


def warmup() -> None:
    """Trigger JIT compilation on a tiny pair so timed runs exclude it."""
    global _warm
    if _warm:
        return
    rng = np.random.default_rng(0)
    img = GrayImage(rng.integers(0, 256, (12, 12)).astype(float))
    estimate_disparity(img, img, FbsParams(rho_agg=1, d_max=2), workers=1)
    estimate_disparity(img, img, FbsParams(rho_agg=1, d_max=2), workers=2)
    _warm = True


@dataclass
class PipelineOutput:
    config: RunConfig
    dataset: DatasetSpec
    result: StereoResult
    reports: list[EvalReport]
    t_total: float
    stage_times: dict[str, float]
    mde_per_s: float
    run_times: list[float]

    def report(self, region: str) -> EvalReport:
        for r in self.reports:
            if r.region == region:
                return r
        raise KeyError(region)

    def rows(self) -> list[dict]:
        return [_row(self.config, self.dataset.name, rep, self.t_total, self.stage_times, self.mde_per_s)
                for rep in self.reports]


def _row(cfg, name, rep, t_total, stage_times, mde, error=""):
    row = {"dataset": name, **cfg.params.as_dict(), "aggregate": cfg.aggregate, "lrc": cfg.lrc,
           "subpixel": cfg.subpixel, "workers": cfg.workers, "error": error}
    if rep is not None:
        row.update(region=rep.region, n=rep.n, n_errors=rep.n_errors, e_pep=f"{rep.e_pep:.4f}")
    if t_total is not None:
        row.update(t_total=f"{t_total:.6f}", mde_per_s=f"{mde:.3f}")
        row.update({f"t_{s}": f"{stage_times[s]:.6f}" for s in STAGES})
    return row


def region_masks(ds: DatasetSpec, gt: DisparityMap) -> list[RegionMask]:
    masks = [RegionMask.everywhere(gt)]
    for label in ("non_occ", "non_occ_textl", "non_occ_discont"):
        if label in ds.masks:
            masks.append(load_region_mask(ds.masks[label], label, gt))
    return masks


def load_dataset(cfg: RunConfig) -> tuple[DatasetSpec, GrayImage, GrayImage, DisparityMap]:
    ds = load_manifest(cfg.dataset)
    ds.check_files()
    return ds, load_image(ds.left), load_image(ds.right), load_ground_truth(ds.gt, ds.gt_scale)


def run_pipeline(cfg: RunConfig, _loaded=None) -> PipelineOutput:
    """Run the full pipeline ``cfg.repeat`` times, evaluate, and write artifacts.

    Timings are medians over the repeats and cover the compute stages only.
    """
    ds, left, right, gt = _loaded or load_dataset(cfg)
    if left.shape != right.shape or left.shape != gt.shape:
        raise PipelineError("load", ValueError("left, right and ground truth differ in size"))
    warmup()
    params = cfg.params
    results = []
    for _ in range(cfg.repeat):
        results.append(estimate_disparity(
            left, right, params, aggregate=cfg.aggregate, lrc=cfg.lrc,
            subpixel=cfg.subpixel, workers=cfg.workers,
        ))
    result = results[-1]
    run_times = [r.t_total for r in results]
    t_total = median(run_times)
    stage_times = {s: median(r.stage_times[s] for r in results) for s in STAGES}
    mde = compute_mde_s(left.width, left.height, params.d_max, t_total)

    reports = []
    for mask in region_masks(ds, gt):
        rep = compute_pep(result.disparity, gt, mask, params.epsilon_d, cfg.count_invalid_as_error)
        reports.append(replace(rep, params=params.as_dict(), runtime_seconds=t_total, mde_per_s=mde))
    out = PipelineOutput(cfg, ds, result, reports, t_total, stage_times, mde, run_times)
    if cfg.out_dir is not None:
        write_artifacts(out, Path(cfg.out_dir))
    return out


def write_artifacts(out: PipelineOutput, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    ds = out.dataset
    write_disparity(out.result.disparity, out_dir / "disp_left.pgm", "gray", ds.gt_scale)
    write_disparity(out.result.disparity, out_dir / "disp_left.pfm", "pfm")
    write_netpbm(out_dir / "lrc_mask.pgm", out.result.lrc_mask.astype(np.uint8) * 255)
    write_csv(out_dir / "metrics.csv", out.rows())
    (out_dir / "config.txt").write_text(out.config.to_text())
    (out_dir / "run_times.json").write_text(json.dumps(out.run_times))


def write_csv(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def run_sweep(cfg: RunConfig) -> list[dict]:
    """One pipeline run per sweep value, everything else held fixed.

    A failing point yields an error row and the sweep carries on. Points run
    sequentially so their timings do not contend.
    """
    if cfg.sweep_axis is None:
        raise ParameterError("run_sweep needs a sweep axis")
    loaded = load_dataset(cfg)
    rows = []
    for value in cfg.sweep_values:
        try:
            point = replace(cfg, params=replace(cfg.params, **{cfg.sweep_axis: value}),
                            sweep_axis=None, sweep_values=(), out_dir=None)
            out = run_pipeline(point, _loaded=loaded)
            rows.extend(out.rows())
            log.info("%s=%s  %s", cfg.sweep_axis, value,
                     "  ".join(f"{r.region}={r.e_pep:.3f}%" for r in out.reports))
        except (StereoError, ValueError, OSError) as exc:
            log.warning("%s=%s failed: %s", cfg.sweep_axis, value, exc)
            bad = replace(cfg, sweep_axis=None, sweep_values=())
            try:
                bad = replace(bad, params=replace(cfg.params, **{cfg.sweep_axis: value}))
            except ParameterError:
                pass
            rows.append(_row(bad, loaded[0].name, None, None, None, None, error=str(exc)))
    if cfg.out_dir is not None:
        out_dir = Path(cfg.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_csv(out_dir / "metrics.csv", rows)
        (out_dir / "config.txt").write_text(cfg.to_text())
    return rows
