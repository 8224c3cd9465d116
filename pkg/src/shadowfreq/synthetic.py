"""Seeded synthetic shadow pairs and point clouds for tests, demos and the CLI.

Scenes are piecewise-flat reflectance tiles with mild texture, lit uniformly
(shadow-free image) or crossed by a shadow band whose illuminant is dimmer and
bluer. The band multiplies pixel values by ``exp(t * (log(dim) + shift))``,
where ``t`` in [0, 1] is a smooth penumbra profile and ``shift`` is a zero-sum
Planckian log-chromaticity offset (Wien approximation, sun vs. sky light).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chromaticity import PLANE_BASIS
from .imagecore import ColorSpace, Image

__all__ = ["SyntheticPair", "planckian_shift", "planckian_pair", "smooth_shadow_pair",
           "planted_points", "write_corpus"]

_C2 = 1.4388e-2                                   # second radiation constant, m K
_WAVELENGTHS = np.array([610e-9, 540e-9, 450e-9])  # narrow-band R, G, B


def planckian_shift(t_lit: float = 5500.0, t_shadow: float = 10000.0) -> np.ndarray:
    """Zero-sum log-chromaticity offset from changing colour temperature ``t_lit -> t_shadow``."""
    s = -_C2 / _WAVELENGTHS * (1.0 / t_shadow - 1.0 / t_lit)
    return s - s.mean()


def _plane_angle(v: np.ndarray) -> float:
    p = PLANE_BASIS @ v
    return math.degrees(math.atan2(p[1], p[0])) % 180.0


@dataclass(frozen=True)
class SyntheticPair:
    shadow: Image
    free: Image
    mask: np.ndarray          # bool, shadow weight above one half
    shadow_weight: np.ndarray  # penumbra profile t in [0, 1]
    labels: np.ndarray        # material tile index per pixel
    shift: np.ndarray         # zero-sum log offset applied at full shadow
    dim: float

    @property
    def illumination_angle(self) -> float:
        """Direction (degrees, plane frame) along which shadowing moves chromaticity."""
        return _plane_angle(self.shift)

    @property
    def invariant_angle(self) -> float:
        """Projection direction that cancels the illumination change."""
        return (self.illumination_angle + 90.0) % 180.0


def _tiles(rng, size, n_tiles, texture, spread):
    colors = 0.5 + rng.uniform(-spread, spread, size=(n_tiles, 3))
    seeds = rng.uniform(0, size, size=(n_tiles, 2))
    yy, xx = np.mgrid[0:size, 0:size]
    dist = (yy[..., None] - seeds[:, 0]) ** 2 + (xx[..., None] - seeds[:, 1]) ** 2
    labels = np.argmin(dist, axis=2)
    refl = colors[labels]
    refl = refl * (1.0 + texture * rng.standard_normal(refl.shape))
    return np.clip(refl, 0.05, 1.0), labels


def _band_profile(size, rng, width_frac=0.3, softness=2.0):
    # diagonal band with a smooth (logistic) penumbra
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    angle = rng.uniform(0.0, math.pi)
    offset = rng.uniform(-0.15, 0.15) * size
    dist = (xx - size / 2) * math.cos(angle) + (yy - size / 2) * math.sin(angle) - offset
    half = width_frac * size / 2
    return 1.0 / (1.0 + np.exp((np.abs(dist) - half) / softness))


def planckian_pair(seed: int, size: int = 64, n_tiles: int = 8, spread: float = 0.1,
                   texture: float = 0.005, dim: float = 0.5, t_shadow: float = 20000.0,
                   width_frac: float = 0.5, softness: float = 4.0) -> SyntheticPair:
    """Shadow / shadow-free pair with a Planckian-tinted soft shadow band.

    Materials are low-saturation tiles (``0.5 +- spread`` per channel) so the
    illumination smear in log-chromaticity dominates the material spread;
    ``softness`` is the penumbra scale in pixels at 64 px and scales with ``size``.
    """
    rng = np.random.default_rng(seed)
    free, labels = _tiles(rng, size, n_tiles, texture, spread)
    t = _band_profile(size, rng, width_frac, softness * size / 64.0)
    shift = planckian_shift(t_shadow=t_shadow)
    log_mult = t[..., None] * (math.log(dim) + shift)
    shadow = np.clip(free * np.exp(log_mult), 0.0, 1.0)
    return SyntheticPair(shadow=Image(shadow, ColorSpace.SRGB), free=Image(free, ColorSpace.SRGB),
                         mask=t > 0.5, shadow_weight=t, labels=labels, shift=shift, dim=dim)


def smooth_shadow_pair(seed: int, size: int = 64, dim: float = 0.55) -> tuple[np.ndarray, np.ndarray]:
    """Textured grey-level image ``x`` and a copy ``y`` under a smooth multiplicative dimming blob."""
    rng = np.random.default_rng(seed)
    x = _tiles(rng, size, 8, texture=0.15, spread=0.3)[0].mean(axis=2)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    cy, cx = rng.uniform(0.3, 0.7, size=2) * size
    r = rng.uniform(0.2, 0.35) * size
    blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * r * r))
    y = x * (1.0 - (1.0 - dim) * blob)
    return x, y


def planted_points(seed: int, theta_deg: float = 30.0, n: int = 10_000,
                   n_materials: int = 5, spread: float = 1.0,
                   noise: float = 0.005) -> np.ndarray:
    """2-D log-chromaticity cloud: material clusters smeared along ``theta_deg``.

    Projection onto ``theta_deg + 90`` collapses the illumination smear.
    """
    rng = np.random.default_rng(seed)
    u = np.array([math.cos(math.radians(theta_deg)), math.sin(math.radians(theta_deg))])
    w = np.array([-u[1], u[0]])
    # materials separated across the illumination direction
    offsets = rng.permutation(n_materials) * 0.3 + rng.uniform(-0.03, 0.03, n_materials)
    labels = rng.integers(0, n_materials, size=n)
    illum = rng.uniform(-spread, spread, size=n)
    pts = offsets[labels, None] * w + illum[:, None] * u
    return pts + noise * rng.standard_normal(pts.shape)


def write_corpus(root, n_pairs: int = 3, size: int = 64, seed: int = 0) -> list:
    """Write an AISTD-style triplet directory (shadow / mask / shadow_free) of synthetic pairs."""
    from pathlib import Path

    from .imagecore import save_image

    root = Path(root)
    for sub in ("shadow", "mask", "shadow_free"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    names = []
    for i in range(n_pairs):
        pair = planckian_pair(seed + i, size=size)
        name = f"synth_{i:03d}.png"
        save_image(pair.shadow, root / "shadow" / name)
        save_image(pair.free, root / "shadow_free" / name)
        save_image(Image(pair.mask.astype(np.float64), ColorSpace.SRGB), root / "mask" / name)
        names.append(name)
    return names
