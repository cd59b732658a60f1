import sys
from pathlib import Path

import hypothesis
import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

ROOT = Path(__file__).resolve().parents[1]

hypothesis.settings.register_profile("default", deadline=None, max_examples=60)
hypothesis.settings.load_profile("default")

# (criterion, verdict, detail) lines printed at the end of the session
ACCEPTANCE_LOG = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LOG


@pytest.fixture
def rng():
    return np.random.default_rng(20180927)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in ACCEPTANCE_LOG:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {crit}: {detail}")


def make_synthetic_dataset(root, h=48, w=72, d_bg=3, d_fg=9, rect=(12, 36, 28, 52), seed=7):
    """Random-dot pair: a fronto-parallel textured square in front of a textured plane.

    Writes netpbm files and a manifest under ``root``; returns the manifest path.
    """
    from fbstereo.dataset_io import write_netpbm

    y0, y1, x0, x1 = rect
    rng = np.random.default_rng(seed)
    tex_bg = rng.integers(0, 256, (h, w + d_fg + 1))
    tex_fg = rng.integers(0, 256, (h, w + d_fg + 1))
    left = tex_bg[:, :w].copy()
    left[y0:y1, x0:x1] = tex_fg[y0:y1, x0:x1]
    right = np.empty((h, w), np.int64)
    for v in range(h):
        for x in range(w):
            in_fg = y0 <= v < y1 and x0 <= x + d_fg < x1
            right[v, x] = tex_fg[v, x + d_fg] if in_fg else tex_bg[v, x + d_bg]
    gt = np.full((h, w), d_bg)
    gt[y0:y1, x0:x1] = d_fg
    nonocc = np.ones((h, w), bool)
    nonocc[y0:y1, x0 - (d_fg - d_bg):x0] = False
    nonocc[:, :d_bg] = False

    root.mkdir(parents=True, exist_ok=True)
    write_netpbm(root / "left.pgm", left.astype(np.uint8))
    write_netpbm(root / "right.pgm", right.astype(np.uint8))
    write_netpbm(root / "gt.pgm", (gt * 4).astype(np.uint8))
    write_netpbm(root / "nonocc.pgm", nonocc.astype(np.uint8) * 255)
    manifest = root / "synthetic.txt"
    manifest.write_text(
        "name = synthetic\nleft = left.pgm\nright = right.pgm\ngt = gt.pgm\n"
        "gt_scale = 4\nd_min = 0\nd_max = 15\nmasks.non_occ = nonocc.pgm\n"
    )
    return manifest


@pytest.fixture(scope="session")
def synthetic_manifest(tmp_path_factory):
    return make_synthetic_dataset(tmp_path_factory.mktemp("synthetic"))
