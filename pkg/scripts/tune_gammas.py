#!/usr/bin/env python3
"""Grid search over (gamma_d, gamma_r) on one dataset; writes a CSV and reports the minimum.

The committed defaults in ``configs/`` come from running this on Cones:

    python scripts/tune_gammas.py --dataset datasets/cones.txt --lrc-tol 0 \
        --out configs/cones_gamma_grid.csv
"""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from fbstereo.core import FbsParams  # noqa: E402
from fbstereo.pipeline import RunConfig, load_dataset, run_pipeline  # noqa: E402

GAMMA_D = [1, 2, 3, 4, 5, 6, 8, 10, 14, 20, 30]
GAMMA_R = [2, 4, 8, 12, 20, 30, 50, 80, 120, 200, 400]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dataset", type=Path, default=ROOT / "datasets" / "cones.txt")
    ap.add_argument("--rho", type=int, default=6)
    ap.add_argument("--lrc-tol", type=float, default=1.0)
    ap.add_argument("--region", default="non_occ")
    ap.add_argument("--gamma-d", type=lambda s: [float(x) for x in s.split(",")], default=GAMMA_D)
    ap.add_argument("--gamma-r", type=lambda s: [float(x) for x in s.split(",")], default=GAMMA_R)
    ap.add_argument("--out", type=Path, required=True)
    args = ap.parse_args(argv)

    base = RunConfig(dataset=args.dataset, repeat=1)
    loaded = load_dataset(base)
    ds = loaded[0]
    params = FbsParams(rho_agg=args.rho, d_min=ds.d_min, d_max=ds.d_max, lrc_tolerance=args.lrc_tol)
    rows = []
    for gd in args.gamma_d:
        for gr in args.gamma_r:
            cfg = replace(base, params=replace(params, gamma_d=float(gd), gamma_r=float(gr)))
            out = run_pipeline(cfg, _loaded=loaded)
            row = {"gamma_d": gd, "gamma_r": gr}
            row.update({r.region: f"{r.e_pep:.4f}" for r in out.reports})
            rows.append(row)
            print(f"gamma_d={gd:<5} gamma_r={gr:<5} " + "  ".join(f"{k}={v}" for k, v in row.items() if k not in ("gamma_d", "gamma_r")), flush=True)

    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    best = min(rows, key=lambda r: float(r[args.region]))
    print(f"minimum {args.region}: gamma_d={best['gamma_d']} gamma_r={best['gamma_r']} e_pep={best[args.region]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
