"""Forward pass of the wavelet attention downsampling module (WADM).

Feature maps are ``(B, C, H, W)`` float64 arrays. Convolutions are stride-1,
zero-padded "same" cross-correlations with a centred odd kernel. Offset fields
have ``2 * kh * kw`` channels laid out tap-major, ``(dy, dx)`` per tap, with
tap index ``m * kw + n``.

Pipeline for an input of even spatial size::

    per-channel Haar -> [A | H | V | D] (4C, H/2, W/2)
      -> Z-pool (max, mean over channels) -> 3x3 offset conv -> 3x3 deformable conv
      -> channel mean -> sigmoid gate on the 4C wavelet features -> 1x1 projection
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .wavelet import haar_dwt2

__all__ = ["ConvKernel", "WadmParams", "z_pool", "conv2d", "offset_conv",
           "deformable_conv", "attention_gate", "wadm_forward", "wadm_trace",
           "wavelet_features", "init_wadm_params", "offsets_to_taps", "taps_to_offsets",
           "save_params", "load_params", "ParameterError"]


class ParameterError(ValueError):
    """A parameter tensor is missing or has the wrong shape."""


@dataclass(frozen=True)
class ConvKernel:
    weight: np.ndarray     # (out, in, kh, kw)
    bias: np.ndarray       # (out,)

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 4:
            raise ValueError(f"kernel weight must be 4-D (out, in, kh, kw), got {w.shape}")
        if b.shape != (w.shape[0],):
            raise ValueError(f"bias shape {b.shape} does not match {w.shape[0]} output channels")
        if w.shape[2] % 2 == 0 or w.shape[3] % 2 == 0:
            raise ValueError(f"kernel size must be odd, got {w.shape[2]}x{w.shape[3]}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("kernel contains non-finite values")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    @property
    def ksize(self) -> tuple:
        return self.weight.shape[2], self.weight.shape[3]

    @property
    def taps(self) -> int:
        return self.weight.shape[2] * self.weight.shape[3]


def _as_fmap(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4:
        raise ValueError(f"feature map must be (B, C, H, W), got shape {x.shape}")
    return x


def z_pool(x: np.ndarray) -> np.ndarray:
    """Concatenate the per-pixel channel max and channel mean -> (B, 2, H, W)."""
    x = _as_fmap(x)
    return np.concatenate([x.max(axis=1, keepdims=True), x.mean(axis=1, keepdims=True)], axis=1)


def _bilinear(x: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample (B, C, H, W) at per-(b, i, j) fractional positions; zero outside."""
    B, C, H, W = x.shape
    y0 = np.floor(ys)
    x0 = np.floor(xs)
    wy1, wx1 = ys - y0, xs - x0
    wy0, wx0 = 1.0 - wy1, 1.0 - wx1
    y0 = y0.astype(np.intp)
    x0 = x0.astype(np.intp)
    bidx = np.arange(B)[:, None, None]
    out = np.zeros((B, C) + ys.shape[1:], dtype=np.float64)
    for dy, wy in ((0, wy0), (1, wy1)):
        for dx, wx in ((0, wx0), (1, wx1)):
            yy, xx = y0 + dy, x0 + dx
            ok = (yy >= 0) & (yy < H) & (xx >= 0) & (xx < W)
            vals = x[bidx, :, np.clip(yy, 0, H - 1), np.clip(xx, 0, W - 1)]  # (B, H', W', C)
            wgt = np.where(ok, wy * wx, 0.0)
            out += np.moveaxis(vals, -1, 1) * wgt[:, None]
    return out


def _accumulate(samples, k: ConvKernel, shape) -> np.ndarray:
    # samples yields (m, n, (B, C, H, W) array) in tap order
    B, _, H, W = shape
    out = np.zeros((B, k.out_channels, H, W), dtype=np.float64)
    for m, n, s in samples:
        out += np.einsum("oc,bchw->bohw", k.weight[:, :, m, n], s)
    return out + k.bias[None, :, None, None]


def conv2d(x: np.ndarray, k: ConvKernel) -> np.ndarray:
    """Zero-padded 'same' cross-correlation, stride 1, centred kernel."""
    x = _as_fmap(x)
    if x.shape[1] != k.in_channels:
        raise ValueError(f"kernel expects {k.in_channels} input channels, got {x.shape[1]}")
    kh, kw = k.ksize
    ph, pw = kh // 2, kw // 2
    H, W = x.shape[2:]
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))

    def taps():
        for m in range(kh):
            for n in range(kw):
                yield m, n, xp[:, :, m:m + H, n:n + W]

    return _accumulate(taps(), k, x.shape)


def offsets_to_taps(field: np.ndarray) -> np.ndarray:
    """(B, 2K, H, W) offset field -> (B, K, 2, H, W) with ``[..., 0, :, :] = dy``."""
    f = _as_fmap(field)
    if f.shape[1] % 2:
        raise ValueError(f"offset field needs an even channel count, got {f.shape[1]}")
    return f.reshape(f.shape[0], f.shape[1] // 2, 2, f.shape[2], f.shape[3])


def taps_to_offsets(taps: np.ndarray) -> np.ndarray:
    t = np.asarray(taps, dtype=np.float64)
    return t.reshape(t.shape[0], t.shape[1] * 2, t.shape[3], t.shape[4])


def offset_conv(z: np.ndarray, k: ConvKernel) -> np.ndarray:
    """Offset field from a convolution of the pooled map; output channels must be even."""
    if k.out_channels % 2:
        raise ValueError(f"offset kernel needs an even number of outputs, got {k.out_channels}")
    return conv2d(z, k)


def deformable_conv(x: np.ndarray, offsets: np.ndarray, k: ConvKernel) -> np.ndarray:
    """Deformable convolution: tap (m, n) samples ``x`` bilinearly at
    ``(i + m - kh//2 + dy, j + n - kw//2 + dx)``, zero outside the image."""
    x = _as_fmap(x)
    if x.shape[1] != k.in_channels:
        raise ValueError(f"kernel expects {k.in_channels} input channels, got {x.shape[1]}")
    taps = offsets_to_taps(offsets)
    B, _, H, W = x.shape
    kh, kw = k.ksize
    if taps.shape != (B, kh * kw, 2, H, W):
        raise ValueError(f"offset field shape {tuple(offsets.shape)} does not fit "
                         f"{kh}x{kw} kernel on {B}x{H}x{W} input")
    ii = np.arange(H, dtype=np.float64)[None, :, None]
    jj = np.arange(W, dtype=np.float64)[None, None, :]

    def samples():
        for m in range(kh):
            for n in range(kw):
                t = m * kw + n
                ys = ii + (m - kh // 2) + taps[:, t, 0]
                xs = jj + (n - kw // 2) + taps[:, t, 1]
                yield m, n, _bilinear(x, ys, xs)

    return _accumulate(samples(), k, x.shape)


def attention_gate(z: np.ndarray, d: np.ndarray) -> np.ndarray:
    """``z * sigmoid(d)``, broadcasting a 1-channel ``d`` across ``z``'s channels."""
    z, d = _as_fmap(z), _as_fmap(d)
    if d.shape[1] not in (1, z.shape[1]) or d.shape[0] != z.shape[0] or d.shape[2:] != z.shape[2:]:
        raise ValueError(f"cannot broadcast gate {d.shape} onto features {z.shape}")
    return z * expit(d)


# ---------------------------------------------------------------------------
# Module
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WadmParams:
    offset: ConvKernel     # 2 -> 2 * taps of ``deform``, 3x3
    deform: ConvKernel     # 2 -> 2, 3x3
    project: ConvKernel    # 4C -> C_out, 1x1

    def __post_init__(self):
        if self.offset.in_channels != 2 or self.deform.in_channels != 2:
            raise ParameterError("offset and deform kernels must take the 2 Z-pool channels")
        if self.offset.out_channels != 2 * self.deform.taps:
            raise ParameterError(f"offset kernel must output {2 * self.deform.taps} channels, "
                                 f"got {self.offset.out_channels}")
        if self.project.ksize != (1, 1):
            raise ParameterError(f"projection must be 1x1, got {self.project.ksize}")

    @property
    def c_in(self) -> int:
        return self.project.in_channels // 4

    @property
    def c_out(self) -> int:
        return self.project.out_channels

    def tensors(self) -> dict:
        return {"offset.weight": self.offset.weight, "offset.bias": self.offset.bias,
                "deform.weight": self.deform.weight, "deform.bias": self.deform.bias,
                "project.weight": self.project.weight, "project.bias": self.project.bias}


def init_wadm_params(c_in: int, c_out: int, seed: int = 0, scale: float = 0.1,
                     ksize: int = 3) -> WadmParams:
    """Seeded uniform(-scale, scale) parameters."""
    rng = np.random.default_rng(seed)

    def kern(o, i, k):
        return ConvKernel(rng.uniform(-scale, scale, (o, i, k, k)), rng.uniform(-scale, scale, o))

    deform = kern(2, 2, ksize)
    offset = kern(2 * ksize * ksize, 2, ksize)
    project = kern(c_out, 4 * c_in, 1)
    return WadmParams(offset=offset, deform=deform, project=project)


def wavelet_features(x: np.ndarray) -> np.ndarray:
    """Per-channel Haar subbands stacked as [A | H | V | D] -> (B, 4C, H/2, W/2)."""
    x = _as_fmap(x)
    H, W = x.shape[2:]
    if H % 2 or W % 2:
        raise ValueError(f"WADM needs even spatial dimensions, got {H}x{W}")
    sb = haar_dwt2(np.moveaxis(x, (0, 1), (2, 3)))   # (H, W, B, C) -> subbands (H/2, W/2, B, C)
    return np.concatenate([np.moveaxis(c, (2, 3), (0, 1)) for c in sb], axis=1)


def wadm_trace(x: np.ndarray, params: WadmParams) -> dict:
    """Run the forward pass and return every intermediate tensor."""
    x = _as_fmap(x)
    if x.shape[1] != params.c_in:
        raise ParameterError(f"parameters built for {params.c_in} input channels, got {x.shape[1]}")
    feats = wavelet_features(x)
    pooled = z_pool(feats)
    offsets = offset_conv(pooled, params.offset)
    deformed = deformable_conv(pooled, offsets, params.deform)
    scale_src = deformed.mean(axis=1, keepdims=True)
    gated = attention_gate(feats, scale_src)
    out = conv2d(gated, params.project)
    return {"wavelet": feats, "pooled": pooled, "offsets": offsets, "deformed": deformed,
            "scale_source": scale_src, "gated": gated, "output": out}


def wadm_forward(x: np.ndarray, params: WadmParams) -> np.ndarray:
    """(B, C, H, W) -> (B, C_out, H/2, W/2)."""
    return wadm_trace(x, params)["output"]


# ---------------------------------------------------------------------------
# Parameter files: JSON list of {"name", "shape", "data"}
# ---------------------------------------------------------------------------

_EXPECTED = ("offset.weight", "offset.bias", "deform.weight", "deform.bias",
             "project.weight", "project.bias")


def save_params(params: WadmParams, path) -> None:
    entries = [{"name": k, "shape": list(v.shape), "data": v.ravel().tolist()}
               for k, v in params.tensors().items()]
    with open(os.fspath(path), "w") as fh:
        json.dump(entries, fh)


def load_params(path) -> WadmParams:
    """Read a parameter file; malformed or mis-shaped tensors raise :class:`ParameterError`."""
    with open(os.fspath(path)) as fh:
        try:
            entries = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(entries, list):
        raise ParameterError(f"{path}: expected a list of named tensors")
    tensors = {}
    for e in entries:
        name = e.get("name") if isinstance(e, dict) else None
        if name not in _EXPECTED:
            raise ParameterError(f"{path}: unexpected tensor {name!r}")
        try:
            shape = tuple(int(s) for s in e["shape"])
            data = np.asarray(e["data"], dtype=np.float64)
            tensors[name] = data.reshape(shape)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParameterError(f"{path}: tensor {name!r} is malformed ({exc})") from exc
        if not np.all(np.isfinite(tensors[name])):
            raise ParameterError(f"{path}: tensor {name!r} contains non-finite values")
    missing = [n for n in _EXPECTED if n not in tensors]
    if missing:
        raise ParameterError(f"{path}: missing tensor(s) {missing}")
    kerns = {}
    for part in ("offset", "deform", "project"):
        try:
            kerns[part] = ConvKernel(tensors[f"{part}.weight"], tensors[f"{part}.bias"])
        except ValueError as exc:
            raise ParameterError(f"{path}: tensor '{part}.weight': {exc}") from exc
    try:
        return WadmParams(**kerns)
    except ParameterError as exc:
        raise ParameterError(f"{path}: {exc}") from exc
