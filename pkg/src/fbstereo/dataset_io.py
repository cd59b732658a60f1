"""Netpbm/PFM rasters, Middlebury-style ground truth and dataset manifests."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import INVALID, DisparityMap, GrayImage, ParameterError, StereoError, rgb_to_gray

# Middlebury conventions: 2001 sets store 8*d, 2003 quarter-size sets store 4*d
GT_SCALE_2001 = 8.0
GT_SCALE_2003 = 4.0


class FormatError(StereoError):
    pass


_CHANNELS = {b"P2": 1, b"P5": 1, b"P3": 3, b"P6": 3}


def _header_tokens(buf: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping # comments."""
    tokens = []
    pos = 0
    n = len(buf)
    while len(tokens) < count:
        while pos < n and buf[pos:pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise FormatError("truncated header")
        if buf[pos:pos + 1] == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not buf[pos:pos + 1].isspace():
            pos += 1
        tokens.append(buf[start:pos])
    return tokens, pos


def read_netpbm(path) -> np.ndarray:
    """Decode a P2/P3/P5/P6 file into a uint8 array of shape (h, w) or (h, w, 3)."""
    buf = Path(path).read_bytes()
    magic = buf[:2]
    if magic not in _CHANNELS:
        raise FormatError(f"{path}: unsupported magic number {magic!r}")
    channels = _CHANNELS[magic]
    tokens, pos = _header_tokens(buf[2:], 3)
    pos += 2
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise FormatError(f"{path}: malformed header") from exc
    if w <= 0 or h <= 0:
        raise FormatError(f"{path}: bad dimensions {w}x{h}")
    if not 0 < maxval <= 255:
        raise FormatError(f"{path}: maxval {maxval} not supported (must be <= 255)")
    count = w * h * channels

    if magic in (b"P5", b"P6"):
        # exactly one whitespace byte separates header and raster
        payload = buf[pos + 1:pos + 1 + count]
        if len(payload) < count:
            raise FormatError(f"{path}: truncated payload ({len(payload)} of {count} bytes)")
        values = np.frombuffer(payload, dtype=np.uint8)
    else:
        body = re.sub(rb"#[^\n\r]*", b" ", buf[pos:])
        values = np.array(body.split()[:count], dtype=np.int64)
        if values.size < count:
            raise FormatError(f"{path}: truncated payload ({values.size} of {count} samples)")
    if values.max(initial=0) > maxval:
        raise FormatError(f"{path}: sample exceeds maxval {maxval}")
    arr = values.astype(np.uint8).reshape((h, w, channels) if channels == 3 else (h, w))
    return arr


def write_netpbm(path, raster: np.ndarray) -> None:
    raster = np.asarray(raster)
    if raster.dtype != np.uint8:
        raise ParameterError("netpbm writer expects uint8 data")
    if raster.ndim == 2:
        magic = b"P5"
    elif raster.ndim == 3 and raster.shape[2] == 3:
        magic = b"P6"
    else:
        raise ParameterError(f"cannot write raster of shape {raster.shape}")
    h, w = raster.shape[:2]
    with open(path, "wb") as fh:
        fh.write(magic + f"\n{w} {h}\n255\n".encode())
        fh.write(np.ascontiguousarray(raster).tobytes())


def load_image(path) -> GrayImage:
    """Load a PGM directly or a PPM through 0.299R + 0.587G + 0.114B."""
    raster = read_netpbm(path)
    if raster.ndim == 3:
        return GrayImage(rgb_to_gray(raster))
    return GrayImage(raster.astype(np.float64))


def load_ground_truth(path, gt_scale: float) -> DisparityMap:
    """Stored gray level divided by ``gt_scale``; gray 0 marks unknown disparity."""
    if not gt_scale > 0:
        raise ParameterError("gt_scale must be positive")
    raster = read_netpbm(path)
    if raster.ndim == 3:
        raster = raster[..., 0]
    gray = raster.astype(np.float64)
    disp = np.where(gray == 0, INVALID, gray / gt_scale)
    return DisparityMap(disp)


def write_pfm(path, data: np.ndarray) -> None:
    """Little-endian single-channel PFM; rows stored bottom to top."""
    data = np.asarray(data, dtype="<f4")
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n-1.0\n".encode())
        fh.write(np.ascontiguousarray(data[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    tokens, pos = _header_tokens(buf, 4)
    magic = tokens[0]
    if magic not in (b"Pf", b"PF"):
        raise FormatError(f"{path}: not a PFM file ({magic!r})")
    w, h = int(tokens[1]), int(tokens[2])
    scale = float(tokens[3])
    channels = 1 if magic == b"Pf" else 3
    dtype = "<f4" if scale < 0 else ">f4"
    count = w * h * channels
    payload = buf[pos + 1:pos + 1 + 4 * count]
    if len(payload) < 4 * count:
        raise FormatError(f"{path}: truncated payload")
    arr = np.frombuffer(payload, dtype=dtype).astype(np.float32)
    shape = (h, w) if channels == 1 else (h, w, 3)
    return arr.reshape(shape)[::-1].copy()


def write_disparity(disp: DisparityMap, path, encoding: str = "gray", gt_scale: float = 1.0) -> None:
    """Write a disparity map as a scaled 8-bit PGM or as a float PFM.

    Invalid pixels become gray 0 or +inf respectively.
    """
    if encoding in ("gray", "gray-scaled"):
        scaled = np.where(disp.valid, np.floor(np.where(disp.valid, disp.data, 0.0) * gt_scale + 0.5), 0)
        write_netpbm(path, np.clip(scaled, 0, 255).astype(np.uint8))
    elif encoding == "pfm":
        write_pfm(path, disp.data)
    else:
        raise ParameterError(f"unknown encoding {encoding!r}")


def load_pfm_disparity(path) -> DisparityMap:
    arr = read_pfm(path).astype(np.float64)
    return DisparityMap(np.where(np.isfinite(arr), arr, INVALID))


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    left: Path
    right: Path
    gt: Path
    gt_scale: float
    d_min: int
    d_max: int
    masks: dict[str, Path] = field(default_factory=dict)

    def __post_init__(self):
        if not self.gt_scale > 0:
            raise ParameterError("gt_scale must be positive")
        if not 0 <= self.d_min < self.d_max:
            raise ParameterError("need 0 <= d_min < d_max")

    def check_files(self) -> None:
        missing = [str(p) for p in (self.left, self.right, self.gt, *self.masks.values()) if not Path(p).exists()]
        if missing:
            raise FileNotFoundError(
                f"dataset {self.name!r} is missing files: {', '.join(missing)} "
                "(run scripts/fetch_middlebury.py)"
            )


def parse_key_values(text: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_manifest(path) -> DatasetSpec:
    """Parse a ``key = value`` manifest; relative paths resolve against its directory."""
    path = Path(path)
    kv = parse_key_values(path.read_text())
    base = path.parent

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else (base / p).resolve()

    try:
        return DatasetSpec(
            name=kv.get("name", path.stem),
            left=resolve(kv["left"]),
            right=resolve(kv["right"]),
            gt=resolve(kv["gt"]),
            gt_scale=float(kv["gt_scale"]),
            d_min=int(kv.get("d_min", 0)),
            d_max=int(kv["d_max"]),
            masks={k[len("masks."):]: resolve(v) for k, v in kv.items() if k.startswith("masks.")},
        )
    except KeyError as exc:
        raise FormatError(f"{path}: manifest lacks required key {exc.args[0]!r}") from None

