#!/usr/bin/env python3
"""Fetch the Middlebury pairs used by the benchmark and convert them to netpbm.

Layout written under ``data/<name>/``::

    left.pgm|ppm  right.pgm|ppm  gt.pgm  nonocc.pgm  [textl.pgm] [discont.pgm]

``gt.pgm`` keeps Middlebury's stored scale (x4 for 2003 sets, x8 for 2001
sets, 0 = unknown) so the manifests in ``datasets/`` can decode it.

Sources
  middlebury   download from vision.middlebury.edu (URL templates below, override
               with --base-2001/--base-2003 if the site layout moves)
  pandora      Cones only: the CNES Pandora source distribution on PyPI bundles
               the 2003 Cones pair, its left ground truth and its non-occluded mask
  dir          convert files you downloaded yourself (--src-dir holding im2/im6/
               disp2 and optional nonocc/all/disc/textl images per dataset)

Examples:
  python scripts/fetch_middlebury.py --source pandora
  python scripts/fetch_middlebury.py --source middlebury teddy venus sawtooth
  python scripts/fetch_middlebury.py --source dir --src-dir ~/Downloads/teddy teddy
"""
from __future__ import annotations

import argparse
import io
import re
import sys
import tarfile
import tempfile
import urllib.parse
import urllib.request
from pathlib import Path

import numpy as np
from PIL import Image

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from fbstereo.dataset_io import write_netpbm  # noqa: E402

DATASETS = {
    # name: (era, directory name upstream, gt scale)
    "cones": ("2003", "cones", 4),
    "teddy": ("2003", "teddy", 4),
    "venus": ("2001", "venus", 8),
    "sawtooth": ("2001", "sawtooth", 8),
}
BASE_2003 = "https://vision.middlebury.edu/stereo/data/scenes2003/newdata/{name}/"
BASE_2001 = "https://vision.middlebury.edu/stereo/data/scenes2001/data/{name}/"
MASK_FILES = {"nonocc": "nonocc", "disc": "discont", "textl": "textl"}

PYPI_SIMPLE = "https://pypi.org/simple"
PANDORA = ("pandora", "1.9.0a1")
PANDORA_MEMBERS = {
    "left": "notebooks/data/Cones_LEFT.tif",
    "right": "notebooks/data/Cones_RIGHT.tif",
    "gt": "notebooks/data/Cones_LEFT_GT.tif",
    "nonocc": "notebooks/data/Occlusion_LEFT.png",
}


def _download(url: str) -> bytes:
    print(f"  GET {url}")
    with urllib.request.urlopen(url, timeout=60) as resp:
        return resp.read()


def _save_image(img: Image.Image, path_stem: Path) -> Path:
    """Write as PGM when the image is gray (in any mode), otherwise as PPM."""
    arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    if np.array_equal(arr[..., 0], arr[..., 1]) and np.array_equal(arr[..., 1], arr[..., 2]):
        arr = arr[..., 0]
    path = path_stem.with_suffix(".ppm" if arr.ndim == 3 else ".pgm")
    write_netpbm(path, np.ascontiguousarray(arr))
    return path


def _save_mask(raw: np.ndarray, path: Path) -> None:
    write_netpbm(path, np.where(raw > 0, 255, 0).astype(np.uint8))


def write_manifest(name: str, left: Path, right: Path, masks: dict[str, Path]) -> Path:
    era, _, scale = DATASETS[name]
    d_max = 59 if era == "2003" else 19
    lines = [
        f"# Middlebury {era} {name}; images fetched by scripts/fetch_middlebury.py",
        f"name = {name}",
        f"left = ../data/{name}/{left.name}",
        f"right = ../data/{name}/{right.name}",
        f"gt = ../data/{name}/gt.pgm",
        f"gt_scale = {scale}",
        "d_min = 0",
        f"d_max = {d_max}",
    ]
    for label, p in masks.items():
        lines.append(f"masks.{label} = ../data/{name}/{p.name}")
    path = ROOT / "datasets" / f"{name}.txt"
    path.write_text("\n".join(lines) + "\n")
    return path


def from_images(name: str, left: Image.Image, right: Image.Image, gt_gray: np.ndarray,
                masks: dict[str, np.ndarray], out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    lp = _save_image(left, out / "left")
    rp = _save_image(right, out / "right")
    write_netpbm(out / "gt.pgm", gt_gray.astype(np.uint8))
    mask_paths = {}
    for label, raw in masks.items():
        p = out / f"{label}.pgm"
        _save_mask(raw, p)
        mask_paths[{"nonocc": "non_occ", "discont": "non_occ_discont", "textl": "non_occ_textl"}[label]] = p
    m = write_manifest(name, lp, rp, mask_paths)
    print(f"  wrote {out} and {m.relative_to(ROOT)}")


def fetch_pandora(name: str, out: Path) -> None:
    if name != "cones":
        raise SystemExit("the pandora source only carries Cones")
    index_url = f"{PYPI_SIMPLE}/{PANDORA[0]}/"
    index = _download(index_url).decode()
    fname = f"{PANDORA[0]}-{PANDORA[1]}.tar.gz"
    hrefs = [h for h in re.findall(r'href="([^"]+)"', index) if h.split("#")[0].endswith(fname)]
    if not hrefs:
        raise SystemExit(f"{fname} not listed on {index_url}")
    blob = _download(urllib.parse.urljoin(index_url, hrefs[0].split("#")[0]))
    prefix = f"{PANDORA[0]}-{PANDORA[1]}/"
    files = {}
    with tarfile.open(fileobj=io.BytesIO(blob)) as tar:
        for key, member in PANDORA_MEMBERS.items():
            files[key] = tar.extractfile(prefix + member).read()
    left = Image.open(io.BytesIO(files["left"]))
    right = Image.open(io.BytesIO(files["right"]))
    gt = np.asarray(Image.open(io.BytesIO(files["gt"])), dtype=np.float64)
    # float disparity in quarter pixels -> Middlebury x4 gray levels
    gt_gray = np.rint(gt * 4)
    if np.abs(gt_gray - gt * 4).max() > 1e-6 or gt_gray.max() > 255:
        raise SystemExit("unexpected ground-truth encoding in the pandora archive")
    nonocc = np.asarray(Image.open(io.BytesIO(files["nonocc"])))
    from_images(name, left, right, gt_gray, {"nonocc": nonocc}, out)


def _load_first(src: Path, stems: list[str]):
    for stem in stems:
        for ext in (".png", ".ppm", ".pgm", ".tif"):
            p = src / f"{stem}{ext}"
            if p.exists():
                return Image.open(p)
    return None


def fetch_dir(name: str, src: Path, out: Path) -> None:
    left = _load_first(src, ["im2", "left"])
    right = _load_first(src, ["im6", "right"])
    gt = _load_first(src, ["disp2", "groundtruth", "gt"])
    if left is None or right is None or gt is None:
        raise SystemExit(f"{src}: need im2, im6 and disp2 images")
    masks = {}
    for stem, label in MASK_FILES.items():
        m = _load_first(src, [stem, f"{stem}_{name}", label])
        if m is not None:
            masks[label] = np.asarray(m.convert("L"))
    from_images(name, left, right, np.asarray(gt.convert("L"), dtype=np.float64), masks, out)


def fetch_middlebury(name: str, out: Path, base_2001: str, base_2003: str) -> None:
    era, upstream, _ = DATASETS[name]
    base = (base_2003 if era == "2003" else base_2001).format(name=upstream)
    ext = ".png" if era == "2003" else ".ppm"
    gext = ".png" if era == "2003" else ".pgm"
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        for stem, e in (("im2", ext), ("im6", ext), ("disp2", gext)):
            (tmp / f"{stem}{e}").write_bytes(_download(base + stem + e))
        for stem in MASK_FILES:
            try:
                (tmp / f"{stem}.png").write_bytes(_download(base + stem + ".png"))
            except OSError as exc:
                print(f"  no {stem} mask upstream ({exc}); region skipped")
        fetch_dir(name, tmp, out)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("names", nargs="*", default=["cones"], choices=list(DATASETS))
    ap.add_argument("--source", choices=("middlebury", "pandora", "dir"), default="middlebury")
    ap.add_argument("--src-dir", type=Path)
    ap.add_argument("--data-dir", type=Path, default=ROOT / "data")
    ap.add_argument("--base-2001", default=BASE_2001)
    ap.add_argument("--base-2003", default=BASE_2003)
    args = ap.parse_args(argv)
    status = 0
    for name in args.names:
        print(f"{name}:")
        out = args.data_dir / name
        try:
            if args.source == "pandora":
                fetch_pandora(name, out)
            elif args.source == "dir":
                if args.src_dir is None:
                    raise SystemExit("--source dir needs --src-dir")
                fetch_dir(name, args.src_dir, out)
            else:
                fetch_middlebury(name, out, args.base_2001, args.base_2003)
        except OSError as exc:
            print(f"  failed: {exc}", file=sys.stderr)
            status = 1
    return status


if __name__ == "__main__":
    sys.exit(main())
