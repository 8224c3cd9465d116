import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shadowfreq.chromaticity import (PLANE_BASIS, DegenerateInputError, LogChromaPoints,
                                     entropy_curve, illumination_compensate, log_chromaticity,
                                     minimize_entropy, non_shadow_region, pca_project,
                                     projection_entropy, shadowfree_chromaticity)
from shadowfreq.mask import mask_from_binary
from shadowfreq.synthetic import planckian_pair, planted_points

from conftest import srgb


def angle_gap(a, b):
    d = abs(a - b) % 180.0
    return min(d, 180.0 - d)


def boundary_spread(values, pair):
    """Pooled within-tile std over every tile that the shadow boundary cuts."""
    sq, n = 0.0, 0
    for lab in np.unique(pair.labels):
        tile = pair.labels == lab
        if pair.mask[tile].all() or not pair.mask[tile].any():
            continue
        px = values[tile]
        sq += float(np.sum((px - px.mean(axis=0)) ** 2))
        n += px.size
    return math.sqrt(sq / n)


class TestLogChromaticity:
    def test_grey_at_origin(self):
        pts = log_chromaticity(srgb(np.full((2, 2, 3), 0.6)))
        assert np.allclose(pts.coords, 0.0, atol=1e-15)

    def test_zero_sum(self):
        pts = log_chromaticity(srgb([[[0.4, 0.2, 0.1]]]))
        assert abs(pts.rho.sum()) < 1e-12

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.05, 0.3), st.floats(0.05, 0.3), st.floats(0.05, 0.3), st.floats(0.2, 3.0))
    def test_scale_invariance(self, r, g, b, s):
        a = log_chromaticity(srgb([[[r, g, b]]])).coords
        c = log_chromaticity(srgb([[[r * s, g * s, b * s]]])).coords
        assert np.max(np.abs(a - c)) < 1e-12

    def test_dark_pixels_excluded(self):
        pts = log_chromaticity(srgb([[[0.0, 0.5, 0.5], [0.3, 0.2, 0.1]]]))
        assert pts.count == 1 and pts.excluded == 1

    def test_plane_basis_orthonormal(self):
        assert np.allclose(PLANE_BASIS @ PLANE_BASIS.T, np.eye(2), atol=1e-15)
        assert np.allclose(PLANE_BASIS.sum(axis=1), 0.0, atol=1e-15)


class TestPca:
    def test_planar_samples(self, rng):
        x = np.column_stack([rng.standard_normal((500, 2)) * [3.0, 1.0], np.zeros(500)])
        basis = pca_project(x)
        assert abs(basis.discarded_eigenvalue) < 1e-12
        assert np.allclose(np.abs(basis.axes[:, 2]), 0.0, atol=1e-12)
        assert np.max(np.abs(basis.reconstruct(basis.project(x)) - x)) < 1e-12

    def test_isotropic(self, rng):
        basis = pca_project(rng.standard_normal((20_000, 3)))
        ev = np.append(basis.eigenvalues, basis.discarded_eigenvalue)
        assert ev.max() / ev.min() < 1.1

    def test_two_points(self):
        a, b = np.array([0.1, 0.5, -0.2]), np.array([0.7, -0.1, 0.4])
        basis = pca_project(np.array([a, a, b, b]))
        d = (b - a) / np.linalg.norm(b - a)
        assert abs(abs(basis.axes[0] @ d) - 1.0) < 1e-9

    def test_sign_convention(self, rng):
        basis = pca_project(rng.standard_normal((200, 3)))
        for ax in basis.axes:
            assert ax[np.flatnonzero(np.abs(ax) > 1e-12)[0]] > 0

    def test_degenerate(self):
        with pytest.raises(DegenerateInputError):
            pca_project(np.ones((10, 3)))
        with pytest.raises(DegenerateInputError):
            pca_project(np.zeros((2, 3)))


class TestEntropy:
    def test_identical_points(self):
        assert projection_entropy(np.ones((50, 2)), 0.3) == 0.0

    def test_uniform_segment(self):
        t = np.linspace(-1, 1, 4001)
        a = math.radians(30)
        pts = np.column_stack([t * math.cos(a), t * math.sin(a)])
        curve = entropy_curve(pts)
        kept = t[np.abs(t) <= 0.9]
        bins = math.ceil(1.8 / (3.5 * kept.std() * len(kept) ** (-1 / 3)))
        assert curve[30] == pytest.approx(math.log(bins), abs=0.02)
        assert curve[30] >= curve.max() - 0.02
        # the perpendicular projection collapses the segment
        assert curve[120] == 0.0

    def test_planted_contrast(self):
        pts = planted_points(0)
        assert projection_entropy(pts, math.radians(120)) < projection_entropy(pts, math.radians(30))

    @pytest.mark.parametrize("seed", range(3))
    def test_planted_recovery(self, seed):
        theta, curve = minimize_entropy(planted_points(seed))
        assert len(curve) == 180
        assert angle_gap(math.degrees(theta), 120.0) <= 2.0

    def test_rotation_equivariance(self):
        pts = planted_points(4)
        phi = math.radians(25)
        rot = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
        t0, _ = minimize_entropy(pts)
        t1, _ = minimize_entropy(pts @ rot.T)
        assert angle_gap(math.degrees(t1), math.degrees(t0) + 25) <= 1.0

    def test_isotropic_noise_flat(self, rng):
        theta, curve = minimize_entropy(rng.standard_normal((5000, 2)))
        assert 0 <= theta < math.pi
        assert curve.max() - curve.min() < 0.1

    def test_ties_pick_smallest_angle(self):
        theta, curve = minimize_entropy(np.ones((20, 2)))
        assert theta == 0.0 and not curve.any()

    def test_accepts_points_object(self):
        pts = LogChromaPoints.from_coords(planted_points(1, n=2000))
        assert projection_entropy(pts, 0.0) > 0


class TestPipeline:
    def test_grey_degenerate(self):
        with pytest.raises(DegenerateInputError, match="grey"):
            shadowfree_chromaticity(srgb(np.random.default_rng(0).random((16, 16, 1)).repeat(3, 2)))

    def test_map_shape_and_curve(self):
        pair = planckian_pair(0)
        cmap = shadowfree_chromaticity(pair.shadow)
        assert cmap.raw.shape == pair.shadow.shape
        assert len(cmap.entropy_curve) == 180
        assert np.allclose(cmap.raw.sum(axis=2), 1.0)
        assert 0 <= cmap.theta_star_degrees < 180

    @pytest.mark.parametrize("seed", range(5))
    def test_baseline_recovers_planted_direction(self, seed):
        pair = planckian_pair(seed)
        cmap = shadowfree_chromaticity(pair.shadow, normalize_brightness=False)
        assert angle_gap(cmap.theta_plane_degrees, pair.invariant_angle) <= 2.0

    @pytest.mark.parametrize("seed", range(10))
    def test_boundary_spread_halved(self, seed):
        pair = planckian_pair(seed)
        cmap = shadowfree_chromaticity(pair.shadow)
        assert boundary_spread(cmap.image.data, pair) < 0.5 * boundary_spread(pair.shadow.data, pair)

    @pytest.mark.parametrize("seed", range(5))
    def test_flat_texture_uniform(self, seed):
        free = planckian_pair(seed).free
        sigma = shadowfree_chromaticity(free).image.data
        assert np.all(sigma.reshape(-1, 3).std(axis=0) <= free.data.reshape(-1, 3).std(axis=0))


class TestCompensation:
    def test_fixed_point(self):
        pair = planckian_pair(1)
        ic = illumination_compensate(shadowfree_chromaticity(pair.shadow), pair.shadow)
        again = illumination_compensate(ic, pair.shadow)
        assert np.allclose(again.gain, ic.gain, rtol=1e-9, atol=0)
        assert np.allclose(again.bias, ic.bias, atol=1e-9)

    def test_scaled_map_gain(self):
        pair = planckian_pair(2)
        cmap = shadowfree_chromaticity(pair.shadow)
        ic = illumination_compensate(cmap, pair.shadow)
        half = illumination_compensate(dataclasses.replace(cmap, raw=cmap.raw * 0.5), pair.shadow)
        assert np.allclose(half.gain, 2.0 * ic.gain, rtol=1e-9, atol=0)

    def test_region_with_mask(self):
        pair = planckian_pair(3)
        m = mask_from_binary(pair.mask)
        assert np.array_equal(non_shadow_region(pair.shadow, m), ~pair.mask)

    def test_brightest_half(self):
        region = non_shadow_region(planckian_pair(3).shadow)
        assert abs(region.mean() - 0.5) < 0.05

    def test_input_reference_matches_lit_mean_with_mask(self):
        pair = planckian_pair(4)
        m = mask_from_binary(pair.mask)
        ic = illumination_compensate(shadowfree_chromaticity(pair.shadow), pair.shadow, m,
                                     reference="input")
        lit = ~pair.mask
        assert np.allclose(ic.corrected[lit].mean(axis=0), pair.shadow.data[lit].mean(axis=0),
                           atol=1e-12)

    @pytest.mark.parametrize("seed", [0, 1, 3, 4, 5])
    def test_input_reference_brightest_half(self, seed):
        pair = planckian_pair(seed)
        em = shadowfree_chromaticity(pair.shadow)
        ic = illumination_compensate(em, pair.shadow, reference="input")
        lit = ~pair.mask
        target = pair.shadow.data[lit].mean(axis=0)
        d_ic = np.abs(ic.image.data[lit].mean(axis=0) - target)
        d_em = np.abs(em.image.data[lit].mean(axis=0) - target)
        assert d_ic.max() <= 0.02
        assert d_ic.max() < d_em.max()

    @pytest.mark.xfail(strict=True, reason="perceived-image reference shifts lit-region colour "
                                           "by more than 0.02 on the synthetic pairs")
    def test_perceived_reference_lit_mean(self):
        pair = planckian_pair(0)
        em = shadowfree_chromaticity(pair.shadow)
        ic = illumination_compensate(em, pair.shadow)
        lit = ~pair.mask
        target = pair.shadow.data[lit].mean(axis=0)
        d_ic = np.abs(ic.image.data[lit].mean(axis=0) - target)
        d_em = np.abs(em.image.data[lit].mean(axis=0) - target)
        assert d_ic.max() <= 0.02 and d_ic.max() < d_em.max()

    def test_bad_reference(self):
        pair = planckian_pair(0)
        with pytest.raises(ValueError):
            illumination_compensate(shadowfree_chromaticity(pair.shadow), pair.shadow,
                                    reference="other")
