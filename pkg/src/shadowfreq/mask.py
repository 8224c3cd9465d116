"""Soft shadow masks and masked/unmasked region statistics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .imagecore import ColorSpace, Image, ImageLike, as_array

__all__ = ["SoftMask", "RegionStats", "compute_soft_mask", "mask_from_binary",
           "region_stats", "adjust_region"]


@dataclass(frozen=True)
class SoftMask:
    """Single-channel map ``m1`` in [-1, 1] and its 3-channel replication ``m``."""

    m1: np.ndarray
    threshold_value: float = 0.0

    def __post_init__(self):
        m1 = np.array(self.m1, dtype=np.float64)
        if m1.ndim == 3 and m1.shape[2] == 1:
            m1 = m1[:, :, 0]
        if m1.ndim != 2:
            raise ValueError(f"m1 must be 2-D, got shape {m1.shape}")
        if m1.size and (m1.min() < -1.0 or m1.max() > 1.0):
            raise ValueError("soft mask values must lie in [-1, 1]")
        m1.flags.writeable = False
        object.__setattr__(self, "m1", m1)

    @property
    def m(self) -> np.ndarray:
        return np.repeat(self.m1[:, :, None], 3, axis=2)

    @property
    def shape(self):
        return self.m1.shape


def compute_soft_mask(shadow: Image, free: Image, percentile: float = 5.0) -> SoftMask:
    """Soft mask from a shadow / shadow-free pair.

    ``d = mean_c(free - shadow)``; entries below the 5th percentile of ``d``
    (linear interpolation) are set to zero, then ``d`` is mapped affinely onto
    [-1, 1]. A constant map becomes ``-1`` everywhere.
    """
    for im in (shadow, free):
        if not isinstance(im, Image) or im.colorspace is not ColorSpace.SRGB or im.channels != 3:
            raise ValueError("soft mask needs two 3-channel SRGB images")
    if shadow.shape != free.shape:
        raise ValueError(f"shape mismatch: {shadow.shape} vs {free.shape}")
    d = (free.data - shadow.data).mean(axis=2)
    cut = float(np.percentile(d, percentile))
    d = np.where(d < cut, 0.0, d)
    lo, hi = d.min(), d.max()
    if hi == lo:
        m1 = np.full(d.shape, -1.0)
    else:
        m1 = np.clip((d - lo) / (hi - lo) * 2.0 - 1.0, -1.0, 1.0)
    return SoftMask(m1, threshold_value=cut)


def mask_from_binary(binary: ImageLike) -> SoftMask:
    """Map a {0, 1} (or [0, 1] grey) mask image to ``m1 = 2 b - 1``."""
    b = as_array(binary)
    if b.ndim == 3:
        b = b.mean(axis=2)
    return SoftMask(np.clip(2.0 * b - 1.0, -1.0, 1.0))


@dataclass(frozen=True)
class RegionStats:
    """Per-channel mean/std inside (``m1 > cut``) and outside the mask.

    Statistics of an empty region are ``None``.
    """

    mean_masked: Optional[np.ndarray]
    std_masked: Optional[np.ndarray]
    mean_unmasked: Optional[np.ndarray]
    std_unmasked: Optional[np.ndarray]
    count_masked: int
    count_unmasked: int
    cut: float = 0.0

    @property
    def masked_empty(self) -> bool:
        return self.count_masked == 0

    @property
    def unmasked_empty(self) -> bool:
        return self.count_unmasked == 0

    def as_dict(self):
        def lst(v):
            return None if v is None else [float(x) for x in v]
        return {"mean_masked": lst(self.mean_masked), "std_masked": lst(self.std_masked),
                "mean_unmasked": lst(self.mean_unmasked), "std_unmasked": lst(self.std_unmasked),
                "count_masked": self.count_masked, "count_unmasked": self.count_unmasked,
                "cut": self.cut}


def _pixels(img: ImageLike) -> np.ndarray:
    arr = as_array(img)
    return arr if arr.ndim == 3 else arr[:, :, None]


def region_stats(img: ImageLike, mask: SoftMask, cut: float = 0.0) -> RegionStats:
    arr = _pixels(img)
    if arr.shape[:2] != mask.shape:
        raise ValueError(f"mask shape {mask.shape} does not match image {arr.shape[:2]}")
    sel = mask.m1 > cut
    inside, outside = arr[sel], arr[~sel]

    def stats(px):
        if len(px) == 0:
            return None, None
        return px.mean(axis=0), px.std(axis=0)

    mi, si = stats(inside)
    mo, so = stats(outside)
    return RegionStats(mi, si, mo, so, int(sel.sum()), int((~sel).sum()), float(cut))


def adjust_region(img: ImageLike, mask: SoftMask, target: RegionStats,
                  cut: float = 0.0) -> tuple[np.ndarray, RegionStats]:
    """Affinely remap masked pixels so their mean/std match ``target``'s unmasked stats.

    A channel whose masked region has zero spread only gets a bias shift.
    Returns the adjusted pixel array and its new region statistics.
    """
    if target.mean_unmasked is None:
        raise ValueError("target has no unmasked-region statistics")
    arr = np.array(_pixels(img))
    if arr.shape[:2] != mask.shape:
        raise ValueError(f"mask shape {mask.shape} does not match image {arr.shape[:2]}")
    sel = mask.m1 > cut
    if sel.any():
        px = arr[sel]
        mu, sd = px.mean(axis=0), px.std(axis=0)
        t_mu, t_sd = target.mean_unmasked, target.std_unmasked
        gain = np.where(sd > 0, t_sd / np.where(sd > 0, sd, 1.0), 1.0)
        arr[sel] = (px - mu) * gain + t_mu
    return arr, region_stats(arr, mask, cut)
