import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shadowfreq.mask import (RegionStats, SoftMask, adjust_region, compute_soft_mask,
                             mask_from_binary, region_stats)
from shadowfreq.synthetic import planckian_pair

from conftest import srgb


def pair_with_diff(diff, base=0.5):
    d = np.asarray(diff, dtype=np.float64)
    free = np.full(d.shape + (3,), base)
    return srgb(free - d[:, :, None]), srgb(free)


class TestSoftMask:
    def test_identical_pair(self):
        img = srgb(np.random.default_rng(0).random((5, 6, 3)))
        sm = compute_soft_mask(img, img)
        assert np.array_equal(sm.m1, np.full((5, 6), -1.0))

    def test_hand_2x2(self):
        shadow, free = pair_with_diff([[0.4, 0.0], [0.0, 0.0]])
        sm = compute_soft_mask(shadow, free)
        assert sm.threshold_value == 0.0
        assert sm.m1.ravel().tolist() == [1.0, -1.0, -1.0, -1.0]

    def test_darker_region_scores_higher(self):
        pair = planckian_pair(2)
        shadow = srgb(pair.free.data * np.where(pair.mask, 0.5, 1.0)[:, :, None])
        m1 = compute_soft_mask(shadow, pair.free).m1
        assert m1[pair.mask].min() > m1[~pair.mask].max()

    def test_range_and_replication(self):
        pair = planckian_pair(0)
        sm = compute_soft_mask(pair.shadow, pair.free)
        assert sm.m1.min() == -1.0 and sm.m1.max() == 1.0
        assert sm.m.shape == pair.shadow.shape
        assert np.array_equal(sm.m[:, :, 2], sm.m1)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_swap_reflects_when_extremes_are_common(self, seed):
        # with >= 6% of pixels at both extremes of d the percentile step is inert,
        # so swapping the images reflects the mask exactly
        rng = np.random.default_rng(seed)
        d = rng.uniform(-0.2, 0.2, (10, 10))
        flat = d.ravel()
        idx = rng.permutation(100)
        flat[idx[:6]], flat[idx[6:12]] = -0.25, 0.25
        a, b = pair_with_diff(d)
        assert np.allclose(compute_soft_mask(a, b).m1, -compute_soft_mask(b, a).m1, atol=1e-12)

    def test_rejects_gray_and_mismatch(self):
        with pytest.raises(ValueError):
            compute_soft_mask(srgb(np.zeros((4, 4))), srgb(np.zeros((4, 4))))
        with pytest.raises(ValueError):
            compute_soft_mask(srgb(np.zeros((4, 4, 3))), srgb(np.zeros((4, 5, 3))))

    def test_range_validated(self):
        with pytest.raises(ValueError):
            SoftMask(np.full((2, 2), 1.5))

    def test_from_binary(self):
        assert mask_from_binary(np.array([[0, 1], [1, 0]])).m1.tolist() == [[-1, 1], [1, -1]]


class TestRegionStats:
    def test_all_masked(self, rng):
        img = rng.random((6, 6, 3))
        st_ = region_stats(img, SoftMask(np.ones((6, 6))))
        assert st_.unmasked_empty and st_.mean_unmasked is None
        assert np.allclose(st_.mean_masked, img.reshape(-1, 3).mean(axis=0))

    def test_constant(self):
        m = mask_from_binary(np.eye(4))
        st_ = region_stats(np.full((4, 4, 3), 0.3), m)
        assert np.allclose(st_.mean_masked, 0.3) and np.allclose(st_.mean_unmasked, 0.3)
        assert np.allclose(st_.std_masked, 0, atol=1e-15) and np.allclose(st_.std_unmasked, 0, atol=1e-15)

    def test_checkerboard(self):
        cb = (np.indices((6, 6)).sum(axis=0) % 2).astype(float)
        st_ = region_stats(cb[:, :, None], mask_from_binary(cb))
        assert st_.mean_masked.tolist() == [1.0] and st_.std_masked.tolist() == [0.0]
        assert st_.mean_unmasked.tolist() == [0.0]
        assert st_.count_masked == st_.count_unmasked == 18

    def test_as_dict_empty(self):
        d = region_stats(np.zeros((2, 2, 3)), SoftMask(np.ones((2, 2)))).as_dict()
        assert d["mean_unmasked"] is None and d["count_masked"] == 4


class TestAdjust:
    def test_already_matching(self, rng):
        img = rng.random((8, 8, 3))
        m = mask_from_binary(rng.random((8, 8)) > 0.5)
        st_ = region_stats(img, m)
        target = RegionStats(None, None, st_.mean_masked, st_.std_masked, 0, 0)
        out, _ = adjust_region(img, m, target)
        assert np.max(np.abs(out - img)) < 1e-12

    def test_two_level_target(self):
        b = np.array([[1, 1, 0, 0]], dtype=float)
        img = np.array([[0.0, 1.0, 0.2, 0.9]])[:, :, None]
        target = RegionStats(None, None, np.array([0.75]), np.array([0.5]), 0, 2)
        out, stats = adjust_region(img, mask_from_binary(b), target)
        assert abs(stats.mean_masked[0] - 0.75) < 1e-12
        assert abs(stats.std_masked[0] - 0.5) < 1e-12
        assert np.array_equal(out[0, 2:, 0], [0.2, 0.9])

    def test_constant_region_bias_only(self):
        img = np.full((2, 2, 1), 0.4)
        target = RegionStats(None, None, np.array([0.9]), np.array([0.2]), 0, 4)
        out, _ = adjust_region(img, SoftMask(np.ones((2, 2))), target)
        assert np.allclose(out, 0.9)

    def test_needs_target_stats(self):
        target = RegionStats(None, None, None, None, 4, 0)
        with pytest.raises(ValueError):
            adjust_region(np.zeros((2, 2, 1)), SoftMask(np.ones((2, 2))), target)
