"""Command-line benchmark: single runs and parameter sweeps over a dataset manifest."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .core import FbsParams, StereoError
from .dataset_io import load_manifest
from .pipeline import RunConfig, parse_sweep, run_pipeline, run_sweep

log = logging.getLogger("fbstereo")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fbs-bench",
        description="Fast bilateral stereo: disparity estimation and Middlebury-style evaluation.",
    )
    p.add_argument("--dataset", type=Path, help="dataset manifest (key = value file)")
    p.add_argument("--config", type=Path, help="re-run a serialized config.txt; other flags override it")
    p.add_argument("--rho-ncc", type=int, help="NCC block half-width")
    p.add_argument("--rho", type=int, help="aggregation half-width")
    p.add_argument("--gamma-d", type=float, help="spatial falloff")
    p.add_argument("--gamma-r", type=float, help="intensity falloff")
    p.add_argument("--dmin", type=int, help="minimum disparity (default: manifest)")
    p.add_argument("--dmax", type=int, help="maximum disparity (default: manifest)")
    p.add_argument("--epsilon-d", type=float, help="error threshold in pixels")
    p.add_argument("--lrc-tol", type=float, help="left-right consistency tolerance")
    p.add_argument("--no-agg", action="store_true", help="skip bilateral aggregation")
    p.add_argument("--no-lrc", action="store_true", help="skip the left-right check")
    p.add_argument("--no-subpixel", action="store_true", help="skip parabola refinement")
    p.add_argument("--workers", type=int, help="row-band worker threads")
    p.add_argument("--sweep", help="axis=v1,v2,... with axis in gamma_d|gamma_r|rho_agg")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--repeat", type=int, help="timed repetitions (median reported, default 5)")
    p.add_argument("--count-invalid-as-error", action=argparse.BooleanOptionalAction, default=None,
                   help="count invalid estimates inside the mask as errors (default on)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.config is not None:
        cfg = RunConfig.from_text(args.config.read_text())
    elif args.dataset is not None:
        ds = load_manifest(args.dataset)
        cfg = RunConfig(dataset=args.dataset, params=FbsParams(d_min=ds.d_min, d_max=ds.d_max))
    else:
        raise SystemExit("either --dataset or --config is required")
    if args.dataset is not None:
        cfg = replace(cfg, dataset=args.dataset)

    overrides = {
        "rho_ncc": args.rho_ncc, "rho_agg": args.rho, "gamma_d": args.gamma_d,
        "gamma_r": args.gamma_r, "d_min": args.dmin, "d_max": args.dmax,
        "epsilon_d": args.epsilon_d, "lrc_tolerance": args.lrc_tol,
    }
    params = replace(cfg.params, **{k: v for k, v in overrides.items() if v is not None})
    cfg = replace(cfg, params=params)
    if args.no_agg:
        cfg = replace(cfg, aggregate=False)
    if args.no_lrc:
        cfg = replace(cfg, lrc=False)
    if args.no_subpixel:
        cfg = replace(cfg, subpixel=False)
    for name, value in (("workers", args.workers), ("repeat", args.repeat), ("out_dir", args.out),
                        ("count_invalid_as_error", args.count_invalid_as_error)):
        if value is not None:
            cfg = replace(cfg, **{name: value})
    if args.sweep:
        axis, values = parse_sweep(args.sweep)
        cfg = replace(cfg, sweep_axis=axis, sweep_values=values)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if cfg.sweep_axis:
            rows = run_sweep(cfg)
            for row in rows:
                if row.get("error"):
                    print(f"{cfg.sweep_axis}={row[cfg.sweep_axis]}  ERROR {row['error']}")
                else:
                    print(f"{cfg.sweep_axis}={row[cfg.sweep_axis]:<8} {row['region']:<16} "
                          f"e_pep={row['e_pep']}%  t={float(row['t_total']):.3f}s")
        else:
            out = run_pipeline(cfg)
            for rep in out.reports:
                print(f"{out.dataset.name:<10} {rep.region:<16} e_pep={rep.e_pep:8.4f}%  N={rep.n}")
            stages = "  ".join(f"{k}={v:.3f}s" for k, v in out.stage_times.items())
            print(f"t_total={out.t_total:.3f}s (median of {cfg.repeat})  Mde/s={out.mde_per_s:.2f}")
            print(f"stages: {stages}")
    except (StereoError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
