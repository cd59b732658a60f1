import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fbstereo.aggregation import bilateral_aggregate, build_range_weights, build_spatial_weights
from fbstereo.core import SENTINEL, CostVolume, DimensionError, GrayImage, ParameterError
from oracles import bilateral_brute, box_average_brute


def random_volume(rng, h, w, nd, p_sentinel=0.15):
    costs = rng.uniform(-1, 1, (h, w, nd))
    costs[rng.random((h, w, nd)) < p_sentinel] = SENTINEL
    return CostVolume(costs, 0, nd - 1)


def guide_image(rng, h, w):
    return GrayImage(rng.integers(0, 256, (h, w)).astype(float))


def aggregate(vol, guide, rho, gd, gr, workers=1):
    return bilateral_aggregate(vol, guide, build_spatial_weights(rho, gd), build_range_weights(gr), workers)


def test_spatial_weight_values():
    t = build_spatial_weights(2, 1.0)
    assert t(0, 0) == 1.0
    assert t(1, 0) == pytest.approx(0.367879, abs=1e-6)
    assert t(1, 1) == pytest.approx(math.exp(-2.0))


def test_spatial_table_symmetries():
    w = build_spatial_weights(2, 1.7).weights
    assert w.shape == (5, 5)
    np.testing.assert_array_equal(w, w.T)
    np.testing.assert_array_equal(w, w[::-1])
    np.testing.assert_array_equal(w, w[:, ::-1])
    assert ((w > 0) & (w <= 1)).all()


def test_range_weight_values():
    t = build_range_weights(10.0)
    assert t[0] == 1.0
    assert t[10] == pytest.approx(0.367879, abs=1e-6)
    assert t.weights.shape == (256,)


@pytest.mark.parametrize("gamma_r", [10.0, 25.0, 200.0])
def test_range_weights_strictly_decrease(gamma_r):
    w = build_range_weights(gamma_r).weights
    assert (np.diff(w) < 0).all()


@given(st.floats(0.05, 1e4))
def test_range_weights_in_unit_interval_and_non_increasing(gamma_r):
    w = build_range_weights(gamma_r).weights
    assert w[0] == 1.0
    assert ((w > 0) & (w <= 1)).all()
    assert (np.diff(w) <= 0).all()


@pytest.mark.parametrize("bad", [0.0, -3.0])
def test_weight_tables_reject_non_positive_gamma(bad):
    with pytest.raises(ParameterError):
        build_spatial_weights(2, bad)
    with pytest.raises(ParameterError):
        build_range_weights(bad)


def test_rho_zero_is_identity(rng):
    vol = random_volume(rng, 7, 8, 4)
    out = aggregate(vol, guide_image(rng, 7, 8), 0, 3.0, 10.0)
    np.testing.assert_array_equal(out.costs, vol.costs)


def test_constant_slice_stays_constant(rng):
    costs = np.full((9, 9, 2), 0.5)
    costs[0, 0, 1] = SENTINEL
    out = aggregate(CostVolume(costs, 0, 1), guide_image(rng, 9, 9), 3, 2.0, 7.0)
    np.testing.assert_allclose(out.costs, 0.5, rtol=0, atol=1e-15)


def test_matches_brute_force_9x9(rng):
    vol = random_volume(rng, 9, 9, 5)
    guide = guide_image(rng, 9, 9)
    out = aggregate(vol, guide, 2, 5.0, 20.0)
    ref = bilateral_brute(vol.costs, guide.data, 2, 5.0, 20.0)
    np.testing.assert_array_equal(out.costs == SENTINEL, ref == SENTINEL)
    np.testing.assert_allclose(out.costs, ref, atol=1e-6)


def test_all_sentinel_window_stays_sentinel(rng):
    costs = np.full((6, 6, 2), SENTINEL)
    costs[5, 5, 0] = 0.3
    out = aggregate(CostVolume(costs, 0, 1), guide_image(rng, 6, 6), 1, 2.0, 20.0)
    assert (out.costs[:, :, 1] == SENTINEL).all()
    assert out.costs[0, 0, 0] == SENTINEL
    assert out.costs[4, 4, 0] == pytest.approx(0.3)


def test_outputs_are_convex_combinations(rng):
    vol = random_volume(rng, 10, 11, 3)
    out = aggregate(vol, guide_image(rng, 10, 11), 2, 3.0, 15.0)
    d = out.costs != SENTINEL
    assert (out.costs[d] >= -1).all() and (out.costs[d] <= 1).all()
    h, w, nd = vol.costs.shape
    for v in range(h):
        for u in range(w):
            for k in range(nd):
                if out.costs[v, u, k] == SENTINEL:
                    continue
                win = vol.costs[max(v - 2, 0):v + 3, max(u - 2, 0):u + 3, k]
                win = win[win != SENTINEL]
                assert win.min() - 1e-12 <= out.costs[v, u, k] <= win.max() + 1e-12


def test_huge_gammas_give_box_average(rng):
    vol = random_volume(rng, 8, 9, 3)
    out = aggregate(vol, guide_image(rng, 8, 9), 2, 1e9, 1e9)
    np.testing.assert_allclose(out.costs, box_average_brute(vol.costs, 2), atol=1e-6)


def test_constant_guide_ignores_gamma_r(rng):
    vol = random_volume(rng, 8, 8, 3)
    guide = GrayImage(np.full((8, 8), 90.0))
    a = aggregate(vol, guide, 2, 2.5, 1.0)
    b = aggregate(vol, guide, 2, 2.5, 500.0)
    np.testing.assert_array_equal(a.costs, b.costs)


@pytest.mark.parametrize("workers", [2, 5])
def test_deterministic_across_workers(rng, workers):
    vol = random_volume(rng, 17, 13, 4)
    guide = guide_image(rng, 17, 13)
    a = aggregate(vol, guide, 3, 4.0, 12.0, workers=1)
    b = aggregate(vol, guide, 3, 4.0, 12.0, workers=workers)
    assert a.costs.tobytes() == b.costs.tobytes()


def test_guide_dims_must_match(rng):
    vol = random_volume(rng, 5, 6, 2)
    with pytest.raises(DimensionError):
        aggregate(vol, guide_image(rng, 6, 5), 1, 1.0, 1.0)


def test_underflowing_window_keeps_exact_average():
    # centre undefined and every neighbour's absolute weight below 1e-308
    costs = np.full((1, 3, 1), SENTINEL)
    costs[0, 0, 0], costs[0, 2, 0] = 0.2, 0.8
    guide = GrayImage(np.array([[0.0, 100.0, 190.0]]))
    out = aggregate(CostVolume(np.concatenate([costs, costs], 2), 0, 1), guide, 1, 5.0, 3.0)
    ref = bilateral_brute(costs, guide.data, 1, 5.0, 3.0)
    # the 190 neighbour is 10 levels closer, so it takes essentially all the weight
    assert ref[0, 1, 0] == pytest.approx(0.8)
    assert out.costs[0, 1, 0] == pytest.approx(ref[0, 1, 0], abs=1e-12)
