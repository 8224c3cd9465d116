"""Single-level orthonormal 2-D Haar transform and per-subband similarity."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imagecore import ImageLike, as_array

__all__ = ["Subbands", "SubbandSimilarity", "haar_dwt2", "haar_idwt2",
           "subband_similarity", "stack_subbands", "crop_even"]


@dataclass(frozen=True)
class Subbands:
    """The four half-resolution Haar components of one image.

    ``h`` holds top-minus-bottom (row direction) differences, ``v`` holds
    left-minus-right (column direction) differences, ``d`` the diagonal.
    Every component has the trailing channel axis of the source, if it had one.
    """

    a: np.ndarray
    h: np.ndarray
    v: np.ndarray
    d: np.ndarray

    def __iter__(self):
        return iter((self.a, self.h, self.v, self.d))

    def as_dict(self):
        return {"a": self.a, "h": self.h, "v": self.v, "d": self.d}

    @property
    def shape(self):
        return self.a.shape


def _blocks(x: np.ndarray):
    return x[0::2, 0::2], x[0::2, 1::2], x[1::2, 0::2], x[1::2, 1::2]


def haar_dwt2(img: ImageLike) -> Subbands:
    """Orthonormal single-level Haar analysis over the first two axes of ``img``.

    For each 2x2 block ``[[p00, p01], [p10, p11]]``::

        A = (p00 + p01 + p10 + p11) / 2
        H = (p00 + p01 - p10 - p11) / 2
        V = (p00 - p01 + p10 - p11) / 2
        D = (p00 - p01 - p10 + p11) / 2
    """
    x = as_array(img)
    if x.ndim < 2:
        raise ValueError(f"expected an array with at least 2 axes, got shape {x.shape}")
    rows, cols = x.shape[:2]
    if rows < 2 or cols < 2 or rows % 2 or cols % 2:
        raise ValueError(f"Haar transform needs even dimensions >= 2, got {rows}x{cols}")
    p00, p01, p10, p11 = _blocks(x)
    s0, d0 = p00 + p01, p00 - p01
    s1, d1 = p10 + p11, p10 - p11
    return Subbands(a=(s0 + s1) * 0.5, h=(s0 - s1) * 0.5,
                    v=(d0 + d1) * 0.5, d=(d0 - d1) * 0.5)


def haar_idwt2(sb: Subbands) -> np.ndarray:
    """Exact inverse of :func:`haar_dwt2`."""
    a, h, v, d = (np.asarray(c, dtype=np.float64) for c in sb)
    if not (a.shape == h.shape == v.shape == d.shape):
        raise ValueError(f"subband shapes differ: {a.shape}, {h.shape}, {v.shape}, {d.shape}")
    out = np.empty((2 * a.shape[0], 2 * a.shape[1]) + a.shape[2:], dtype=np.float64)
    ah, ap = a + h, a - h
    vd, vm = v + d, v - d
    out[0::2, 0::2] = (ah + vd) * 0.5
    out[0::2, 1::2] = (ah - vd) * 0.5
    out[1::2, 0::2] = (ap + vm) * 0.5
    out[1::2, 1::2] = (ap - vm) * 0.5
    return out


def stack_subbands(sb: Subbands) -> np.ndarray:
    """Concatenate A, H, V, D along the channel axis (C -> 4C)."""
    parts = [c if c.ndim == 3 else c[:, :, None] for c in sb]
    return np.concatenate(parts, axis=2)


def crop_even(x: np.ndarray) -> np.ndarray:
    """Crop a raster to even height and width by dropping a trailing row/column."""
    rows, cols = x.shape[:2]
    return x[:rows - rows % 2, :cols - cols % 2]


@dataclass(frozen=True)
class SubbandSimilarity:
    """Per-subband PSNR in dB; ``math.inf`` marks identical subbands."""

    psnr_a: float
    psnr_h: float
    psnr_v: float
    psnr_d: float

    def as_dict(self):
        return {"psnr_a": self.psnr_a, "psnr_h": self.psnr_h,
                "psnr_v": self.psnr_v, "psnr_d": self.psnr_d}

    @property
    def identical(self) -> dict:
        return {k: math.isinf(v) for k, v in self.as_dict().items()}


def _psnr(ref: np.ndarray, cmp: np.ndarray) -> float:
    mse = float(np.mean((ref - cmp) ** 2))
    if mse == 0.0:
        return math.inf
    peak = float(ref.max() - ref.min())
    if peak == 0.0:
        # flat reference: fall back to the comparison's range, else unit peak
        peak = float(cmp.max() - cmp.min()) or 1.0
    return 10.0 * math.log10(peak * peak / mse)


def subband_similarity(x: ImageLike, y: ImageLike) -> SubbandSimilarity:
    """PSNR between corresponding Haar subbands of ``x`` (reference) and ``y``.

    The peak value for each subband is the dynamic range of the reference subband.
    """
    xa, ya = as_array(x), as_array(y)
    if xa.shape != ya.shape:
        raise ValueError(f"shape mismatch: {xa.shape} vs {ya.shape}")
    sx, sy = haar_dwt2(xa), haar_dwt2(ya)
    return SubbandSimilarity(*(_psnr(r, c) for r, c in zip(sx, sy)))
