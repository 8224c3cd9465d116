import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from shadowfreq.synthetic import smooth_shadow_pair
from shadowfreq.wavelet import (Subbands, crop_even, haar_dwt2, haar_idwt2, stack_subbands,
                                subband_similarity)


def test_hand_2x2():
    sb = haar_dwt2(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert (sb.a.item(), sb.h.item(), sb.v.item(), sb.d.item()) == (5.0, -2.0, -1.0, 0.0)


def test_constant_image():
    sb = haar_dwt2(np.full((6, 8), 0.7))
    assert np.allclose(sb.a, 1.4, atol=1e-15)
    for c in (sb.h, sb.v, sb.d):
        assert not c.any()


def test_constant_inverse():
    z = np.zeros((3, 4))
    assert np.allclose(haar_idwt2(Subbands(np.full((3, 4), 2 * 0.25), z, z, z)), 0.25, atol=1e-15)


def test_odd_rejected():
    with pytest.raises(ValueError):
        haar_dwt2(np.zeros((5, 4)))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 16), st.integers(1, 16), st.integers(0, 2 ** 32 - 1))
def test_roundtrip_and_energy(h2, w2, seed):
    x = np.random.default_rng(seed).standard_normal((2 * h2, 2 * w2, 3))
    sb = haar_dwt2(x)
    assert sb.shape == (h2, w2, 3)
    assert np.max(np.abs(haar_idwt2(sb) - x)) < 1e-12
    energy = sum(float(np.sum(c ** 2)) for c in sb)
    assert energy == pytest.approx(float(np.sum(x ** 2)), rel=1e-9)


def test_random_64():
    x = np.random.default_rng(3).random((64, 64))
    assert np.max(np.abs(haar_idwt2(haar_dwt2(x)) - x)) < 1e-12


def test_stack_and_crop():
    x = np.random.default_rng(0).random((7, 9, 3))
    assert crop_even(x).shape == (6, 8, 3)
    assert stack_subbands(haar_dwt2(crop_even(x))).shape == (3, 4, 12)


def test_identical_similarity():
    x = np.random.default_rng(1).random((16, 16))
    sim = subband_similarity(x, x)
    assert all(sim.identical.values())
    assert all(math.isinf(v) for v in sim.as_dict().values())


def test_smooth_shadow_ordering():
    wins = 0
    for seed in range(10):
        x, y = smooth_shadow_pair(seed)
        s = subband_similarity(x, y)
        wins += s.psnr_d > s.psnr_a and s.psnr_v > s.psnr_a
    assert wins >= 9


def test_white_noise_even_spread():
    rng = np.random.default_rng(5)
    x = rng.random((64, 64))
    y = x + rng.normal(0, 0.01, x.shape)
    vals = list(subband_similarity(x, y).as_dict().values())
    assert all(math.isfinite(v) for v in vals)
    assert max(vals) - min(vals) < 3.0
