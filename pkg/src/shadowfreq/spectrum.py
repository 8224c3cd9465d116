"""2-D discrete Fourier transform and the focal spectral weight matrix.

The forward transform is unnormalised,
``F(u, v) = sum_x sum_y f(x, y) exp(-2 pi i (u x / M + v y / N))``,
and all normalisation lives in :func:`idft2`. Bin (0, 0) is DC; nothing is shifted.

Both axes are transformed separably. Power-of-two lengths go through an
iterative radix-2 decimation-in-time FFT, other lengths through an exact
DFT matrix product.
"""

from __future__ import annotations

import numpy as np

from .imagecore import ImageLike, as_array

__all__ = ["dft2", "idft2", "spectral_weight", "fft1d", "log_magnitude"]


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _radix2(x: np.ndarray) -> np.ndarray:
    # x: (batch, n) complex, n a power of two
    batch, n = x.shape
    x = x[:, _bit_reverse(n)]
    m = 2
    while m <= n:
        half = m // 2
        tw = np.exp(-2j * np.pi * np.arange(half) / m)
        blocks = x.reshape(batch, n // m, m)
        u = blocks[:, :, :half]
        t = blocks[:, :, half:] * tw
        x = np.concatenate([u + t, u - t], axis=2).reshape(batch, n)
        m *= 2
    return x


def _dft_matrix(n: int) -> np.ndarray:
    k = np.arange(n)
    # reduce the phase index mod n before scaling to keep the argument small
    return np.exp(-2j * np.pi * ((np.outer(k, k) % n) / n))


def fft1d(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Unnormalised forward DFT along one axis."""
    x = np.moveaxis(np.asarray(x, dtype=np.complex128), axis, -1)
    lead, n = x.shape[:-1], x.shape[-1]
    flat = x.reshape(-1, n)
    if n == 1:
        out = flat.copy()
    elif _is_pow2(n):
        out = _radix2(flat)
    else:
        out = flat @ _dft_matrix(n).T
    return np.moveaxis(out.reshape(lead + (n,)), -1, axis)


def _single_channel(channel: ImageLike) -> np.ndarray:
    x = as_array(channel)
    if x.ndim == 3:
        if x.shape[2] != 1:
            raise ValueError(f"dft2 expects a single-channel image, got {x.shape[2]} channels")
        x = x[:, :, 0]
    if x.ndim != 2:
        raise ValueError(f"dft2 expects a 2-D array, got shape {x.shape}")
    if x.shape[0] < 1 or x.shape[1] < 1:
        raise ValueError("dft2 needs M, N >= 1")
    return x


def dft2(channel: ImageLike) -> np.ndarray:
    """Forward 2-D DFT of a single-channel raster; returns an (M, N) complex array."""
    x = _single_channel(channel)
    return fft1d(fft1d(x, axis=1), axis=0)


def idft2(spec: np.ndarray) -> np.ndarray:
    """Inverse 2-D DFT with 1/(MN) normalisation; returns the real part."""
    s = np.asarray(spec, dtype=np.complex128)
    if s.ndim != 2 or s.size == 0:
        raise ValueError(f"spectrum must be a non-empty 2-D array, got shape {s.shape}")
    out = np.conj(fft1d(fft1d(np.conj(s), axis=1), axis=0)) / s.size
    return out.real


def spectral_weight(sr: np.ndarray, sf: np.ndarray, alpha: float = 1.0) -> np.ndarray:
    """Focal weight ``|sr - sf| ** alpha`` with the convention ``0 ** 0 == 1``."""
    sr, sf = np.asarray(sr), np.asarray(sf)
    if sr.shape != sf.shape:
        raise ValueError(f"spectrum shapes differ: {sr.shape} vs {sf.shape}")
    if not alpha >= 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    return np.abs(sr - sf) ** float(alpha)


def log_magnitude(spec: np.ndarray) -> np.ndarray:
    """``log(1 + |F|)`` mapped affinely onto [0, 1] for display."""
    mag = np.log1p(np.abs(spec))
    lo, hi = mag.min(), mag.max()
    if hi == lo:
        return np.zeros_like(mag)
    return (mag - lo) / (hi - lo)
