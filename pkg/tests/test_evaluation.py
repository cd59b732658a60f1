import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fbstereo.core import INVALID, DimensionError, DisparityMap, EvaluationError, ParameterError
from fbstereo.dataset_io import write_netpbm
from fbstereo.evaluation import RegionMask, compute_mde_s, compute_pep, load_region_mask


def dm(a):
    return DisparityMap(np.asarray(a, dtype=float))


def test_pep_zero_when_identical(rng):
    gt = dm(rng.uniform(0, 50, (6, 7)))
    rep = compute_pep(gt, gt, RegionMask.everywhere(gt), 2.0)
    assert rep.e_pep == 0.0 and rep.n == 42


def test_pep_threshold_is_strict():
    gt = dm([[10.0]])
    est = dm([[12.0]])
    assert compute_pep(est, gt, RegionMask(np.ones((1, 1)), "non_occ"), 2.0).e_pep == 0.0
    assert compute_pep(dm([[12.0001]]), gt, RegionMask(np.ones((1, 1)), "non_occ"), 2.0).e_pep == 100.0


def test_pep_counts_three_of_ten():
    gt = dm(np.arange(10.0).reshape(2, 5))
    est = gt.data.copy()
    est[0, 1] += 3.0
    est[1, 2] -= 3.0
    est[1, 4] += 3.0
    rep = compute_pep(dm(est), gt, RegionMask(np.ones((2, 5)), "non_occ"), 2.0)
    assert rep.e_pep == pytest.approx(30.0)
    assert (rep.n, rep.n_errors, rep.region) == (10, 3, "non_occ")


def test_pep_excludes_gt_invalid_and_counts_est_invalid():
    gt = dm([[INVALID, 1.0, 2.0, 3.0]])
    est = dm([[0.0, INVALID, 2.0, 3.0]])
    mask = RegionMask(np.ones((1, 4)), "all")
    rep = compute_pep(est, gt, mask, 2.0)
    assert rep.n == 3 and rep.e_pep == pytest.approx(100 / 3)
    rep = compute_pep(est, gt, mask, 2.0, count_invalid_as_error=False)
    assert rep.n == 2 and rep.e_pep == 0.0


def test_pep_empty_mask_raises():
    gt = dm([[1.0, 2.0]])
    with pytest.raises(EvaluationError):
        compute_pep(gt, gt, RegionMask(np.zeros((1, 2)), "non_occ"), 2.0)


def test_pep_shape_mismatch():
    with pytest.raises(DimensionError):
        compute_pep(dm([[1.0]]), dm([[1.0, 2.0]]), RegionMask(np.ones((1, 2)), "all"), 2.0)


def test_unknown_region_label():
    with pytest.raises(ParameterError):
        RegionMask(np.ones((2, 2)), "occluded")


@given(st.integers(0, 2**32 - 1))
def test_pep_permutation_invariant_and_monotone(seed):
    rng = np.random.default_rng(seed)
    gt = rng.uniform(0, 30, 24)
    est = gt + rng.choice([0.0, 5.0], 24)
    mask = RegionMask(np.ones((4, 6)), "all")
    rep = compute_pep(dm(est.reshape(4, 6)), dm(gt.reshape(4, 6)), mask, 2.0)
    perm = rng.permutation(24)
    rep_p = compute_pep(dm(est[perm].reshape(4, 6)), dm(gt[perm].reshape(4, 6)), mask, 2.0)
    assert rep.e_pep == rep_p.e_pep
    good = np.flatnonzero(est == gt)
    if good.size:
        est2 = est.copy()
        est2[good[0]] += 10.0
        rep2 = compute_pep(dm(est2.reshape(4, 6)), dm(gt.reshape(4, 6)), mask, 2.0)
        assert rep2.e_pep - rep.e_pep == pytest.approx(100 / 24)


def test_mde_reference_operating_point():
    # 450 x 375 pixels, 60 disparities, 29.4 ms
    assert compute_mde_s(450, 375, 60, 0.0294) == pytest.approx(344.39, abs=0.01)


def test_mde_simple():
    assert compute_mde_s(100, 100, 10, 1.0) == pytest.approx(0.1)


@given(st.integers(1, 2000), st.integers(1, 2000), st.integers(1, 256), st.floats(1e-3, 1e3))
def test_mde_scaling(w, h, d, t):
    m = compute_mde_s(w, h, d, t)
    assert compute_mde_s(w, h, d, 2 * t) == pytest.approx(m / 2)
    assert compute_mde_s(2 * w, h, d, t) == pytest.approx(2 * m)
    assert compute_mde_s(w, h, 2 * d, t) == pytest.approx(2 * m)


@pytest.mark.parametrize("t", [0.0, -1.0])
def test_mde_rejects_non_positive_time(t):
    with pytest.raises(ParameterError):
        compute_mde_s(10, 10, 10, t)


def test_load_region_mask(tmp_path):
    raw = np.array([[0, 255, 1], [7, 0, 255]], np.uint8)
    write_netpbm(tmp_path / "m.pgm", raw)
    gt = dm([[1.0, INVALID, 2.0], [3.0, 4.0, 5.0]])
    mask = load_region_mask(tmp_path / "m.pgm", "non_occ", gt)
    assert mask.include.tolist() == [[False, False, True], [True, False, True]]
    assert mask.label == "non_occ"


def test_load_region_mask_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_region_mask(tmp_path / "missing.pgm", "non_occ")
    write_netpbm(tmp_path / "m.pgm", np.zeros((2, 2), np.uint8))
    with pytest.raises(DimensionError):
        load_region_mask(tmp_path / "m.pgm", "non_occ", dm(np.ones((3, 2))))
