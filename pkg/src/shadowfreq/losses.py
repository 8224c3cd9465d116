"""Shadow-removal loss functionals evaluated on images, subbands and masks.

Every loss returns a :class:`LossReport` whose ``components`` recombine to
``value`` under the formula of that loss and whose ``parameters`` record the
coefficients that were used.
"""

from __future__ import annotations

import math
from decimal import Decimal
from dataclasses import dataclass, field
from typing import Mapping, Optional, Protocol

import numpy as np

from .chromaticity import ChromaticityMap, render_chromaticity
from .imagecore import Image, ImageLike, as_array
from .mask import RegionStats, SoftMask
from .spectrum import dft2, spectral_weight
from .wavelet import Subbands, haar_dwt2

__all__ = [
    "LossReport", "FeatureExtractor", "PyramidGradientExtractor", "DEFAULT_WEIGHTS",
    "loss_vd", "loss_ff", "loss_frequency", "loss_brightness_ch", "chroma_l1",
    "loss_perceptual", "loss_mse_weighted", "loss_smooth", "loss_recon",
    "loss_align", "overall_loss", "log_cosh",
]

#: overall-loss weights; the first three are the training values reported for the method
DEFAULT_WEIGHTS = {"brightness_ch": 1.1, "frequency": 0.3, "align": 0.01, "recon": 1.0}


@dataclass
class LossReport:
    name: str
    value: float
    components: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {"name": self.name, "value": float(self.value),
               "components": {k: float(v) for k, v in self.components.items()},
               "parameters": {k: (float(v) if isinstance(v, (int, float, np.floating)) else v)
                              for k, v in self.parameters.items()}}
        if self.flags:
            out["flags"] = list(self.flags)
        return out


def _check_same(a: np.ndarray, b: np.ndarray, what: str = "inputs"):
    if a.shape != b.shape:
        raise ValueError(f"{what} differ in shape: {a.shape} vs {b.shape}")


# ---------------------------------------------------------------------------
# Frequency losses
# ---------------------------------------------------------------------------

def loss_vd(fake: Subbands, real: Subbands, c: float = 1.0) -> LossReport:
    """Mean squared difference of the scaled V and D subbands (A and H are ignored)."""
    if not c > 0:
        raise ValueError(f"c must be positive, got {c}")
    for name in ("v", "d"):
        _check_same(getattr(fake, name), getattr(real, name), f"{name.upper()} subbands")
    vf, vr = np.asarray(fake.v), np.asarray(real.v)
    df, dr = np.asarray(fake.d), np.asarray(real.d)
    lv = float(np.mean((c * vf - c * vr) ** 2))
    ld = float(np.mean((c * df - c * dr) ** 2))
    return LossReport("vd", lv + ld, {"v": lv, "d": ld}, {"c": c})


def _channels(x: np.ndarray):
    if x.ndim == 2:
        return [x]
    return [x[:, :, k] for k in range(x.shape[2])]


def loss_ff(real: ImageLike, fake: ImageLike, alpha: float = 1.0) -> LossReport:
    """Focal frequency loss ``mean_{u,v} w(u,v) |F_r - F_f|^2`` averaged over channels."""
    r, f = as_array(real), as_array(fake)
    _check_same(r, f)
    per_channel = []
    for cr, cf in zip(_channels(r), _channels(f)):
        fr, ff = dft2(cr), dft2(cf)
        w = spectral_weight(fr, ff, alpha)
        per_channel.append(float(np.mean(w * np.abs(fr - ff) ** 2)))
    value = float(np.mean(per_channel))
    comps = {f"channel_{k}": v for k, v in enumerate(per_channel)}
    return LossReport("ff", value, comps, {"alpha": alpha})


def loss_frequency(fake: ImageLike, real: ImageLike, lambda1: float = 0.5,
                   lambda2: float = 0.5, c: float = 1.0, alpha: float = 1.0) -> LossReport:
    """``lambda1 * L_VD(haar(fake), haar(real)) + lambda2 * L_FF(real, fake)``."""
    f, r = as_array(fake), as_array(real)
    _check_same(f, r)
    vd = loss_vd(haar_dwt2(f), haar_dwt2(r), c)
    ff = loss_ff(r, f, alpha)
    return LossReport("frequency", lambda1 * vd.value + lambda2 * ff.value,
                      {"vd": vd.value, "ff": ff.value},
                      {"lambda1": lambda1, "lambda2": lambda2, "c": c, "alpha": alpha})


# ---------------------------------------------------------------------------
# Brightness-chromaticity
# ---------------------------------------------------------------------------

def chroma_l1(a: ImageLike, b: ImageLike) -> float:
    """Mean absolute difference between two chromaticity maps."""
    x, y = as_array(a), as_array(b)
    _check_same(x, y, "chromaticity maps")
    return float(np.mean(np.abs(x - y)))


def loss_brightness_ch(output: Image, reference_map: ChromaticityMap) -> LossReport:
    """L1 distance between the output's chromaticity and the reference map.

    The output is rendered with the reference's projection (PCA frame,
    ``theta_star``) and its affine compensation, so an output identical to the
    reference's source image scores exactly zero.
    """
    if (output.height, output.width) != reference_map.raw.shape[:2]:
        raise ValueError("output and reference map differ in size")
    sigma_o = np.clip(render_chromaticity(output, reference_map), 0.0, 1.0)
    value = chroma_l1(sigma_o, reference_map.image.data)
    return LossReport("brightness_ch", value, {"l1": value},
                      {"theta_star_degrees": reference_map.theta_star_degrees},
                      flags=["distance=l1"])


# ---------------------------------------------------------------------------
# Mask reconstruction
# ---------------------------------------------------------------------------

class FeatureExtractor(Protocol):
    name: str

    def __call__(self, img: np.ndarray) -> np.ndarray: ...


def _downsample2(x: np.ndarray) -> np.ndarray:
    h, w = (x.shape[0] // 2) * 2, (x.shape[1] // 2) * 2
    x = x[:h, :w]
    return 0.25 * (x[0::2, 0::2] + x[0::2, 1::2] + x[1::2, 0::2] + x[1::2, 1::2])


class PyramidGradientExtractor:
    """Weight-free perceptual stand-in: a 3-level 2x mean pyramid plus forward differences.

    Features are, in order, the pyramid levels (full, 1/2, 1/4 resolution) of
    every channel followed by the horizontal and vertical first differences of
    the full-resolution image.
    """

    name = "pyramid3+grad"

    def __init__(self, levels: int = 3):
        self.levels = levels

    def parts(self, img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = as_array(img)
        if x.ndim == 2:
            x = x[:, :, None]
        pyr, level = [], x
        for k in range(self.levels):
            pyr.append(level.ravel())
            if k + 1 < self.levels:
                if min(level.shape[:2]) < 2:
                    break
                level = _downsample2(level)
        grads = [np.diff(x, axis=1).ravel(), np.diff(x, axis=0).ravel()]
        return np.concatenate(pyr), np.concatenate(grads)

    def __call__(self, img: np.ndarray) -> np.ndarray:
        return np.concatenate(self.parts(img))


def loss_perceptual(pred: ImageLike, target: ImageLike,
                    fx: Optional[FeatureExtractor] = None) -> LossReport:
    fx = fx or PyramidGradientExtractor()
    p, t = as_array(pred), as_array(target)
    _check_same(p, t)
    fp, ft = np.asarray(fx(p), dtype=np.float64), np.asarray(fx(t), dtype=np.float64)
    if fp.shape != ft.shape:
        raise ValueError(f"extractor {fx.name} returned mismatched features {fp.shape} vs {ft.shape}")
    if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(ft))):
        raise ValueError(f"extractor {fx.name} produced non-finite features")
    value = float(np.mean((fp - ft) ** 2))
    return LossReport("perceptual", value, {}, {"extractor": fx.name, "n_features": fp.size})


def _mask_pair(a: SoftMask, b: SoftMask):
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    return a.m1, b.m1


def loss_mse_weighted(pred_mask: SoftMask, true_mask: SoftMask) -> LossReport:
    """Squared mask error, doubled where the prediction exceeds 0.5."""
    mp, mt = _mask_pair(pred_mask, true_mask)
    w = np.where(mp > 0.5, 2.0, 1.0)
    value = float(np.mean(w * (mp - mt) ** 2))
    return LossReport("mse_w", value, {}, {"threshold": 0.5, "high_weight": 2.0})


def _forward_diff(x: np.ndarray, axis: int) -> np.ndarray:
    out = np.zeros_like(x)
    src = [slice(None)] * x.ndim
    dst = [slice(None)] * x.ndim
    src[axis], dst[axis] = slice(1, None), slice(0, -1)
    out[tuple(dst)] = x[tuple(src)] - x[tuple(dst)]
    return out


def loss_smooth(mask: SoftMask, sf: ImageLike) -> LossReport:
    """Mean over all pixels and channels of ``|dx| + |dy|`` of ``M * S_f`` (forward differences)."""
    img = as_array(sf)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.shape[:2] != mask.shape:
        raise ValueError(f"mask shape {mask.shape} does not match image {img.shape[:2]}")
    m = mask.m if img.shape[2] == 3 else np.repeat(mask.m1[:, :, None], img.shape[2], axis=2)
    prod = m * img
    gx, gy = np.abs(_forward_diff(prod, 1)), np.abs(_forward_diff(prod, 0))
    value = float(np.mean(gx + gy))
    return LossReport("smooth", value, {"dx": float(np.mean(gx)), "dy": float(np.mean(gy))},
                      {"gradient": "forward"})


def loss_recon(pred_mask: SoftMask, true_mask: SoftMask, sf: ImageLike,
               fx: Optional[FeatureExtractor] = None, reg_weight: float = 0.01) -> LossReport:
    """``L_smooth + L_perceptual + L_MSE-w + 0.01 * mean(M ** 2)`` on the predicted mask."""
    smooth = loss_smooth(pred_mask, sf)
    perc = loss_perceptual(pred_mask.m, true_mask.m, fx)
    msew = loss_mse_weighted(pred_mask, true_mask)
    reg = reg_weight * float(np.mean(pred_mask.m ** 2))
    comps = {"smooth": smooth.value, "perceptual": perc.value, "mse_w": msew.value,
             "regularizer": reg}
    value = comps["smooth"] + comps["perceptual"] + comps["mse_w"] + comps["regularizer"]
    return LossReport("recon", value, comps,
                      {"reg_weight": reg_weight, "extractor": perc.parameters["extractor"]})


# ---------------------------------------------------------------------------
# Alignment and total
# ---------------------------------------------------------------------------

def log_cosh(x) -> np.ndarray:
    """``ln(cosh(x))`` without overflow for large ``|x|``."""
    a = np.abs(np.asarray(x, dtype=np.float64))
    return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)


def loss_align(adjusted: RegionStats, reference: RegionStats) -> LossReport:
    """Channel-mean log-cosh distance between adjusted and true masked-region means."""
    if adjusted.mean_masked is None or reference.mean_masked is None:
        raise ValueError("masked-region statistics are absent (empty masked region)")
    mo = np.atleast_1d(adjusted.mean_masked)
    mw = np.atleast_1d(reference.mean_masked)
    _check_same(mo, mw, "channel statistics")
    per = log_cosh(mo - mw)
    value = float(np.mean(per))
    return LossReport("align", value, {f"channel_{k}": float(v) for k, v in enumerate(per)},
                      {"channels": len(per)})


def overall_loss(components: Mapping[str, LossReport],
                 weights: Optional[Mapping[str, float]] = None) -> LossReport:
    """Weighted sum of named loss reports.

    Known component names are the keys of :data:`DEFAULT_WEIGHTS`; any known
    component missing from ``components`` contributes zero and is flagged.
    """
    w = dict(DEFAULT_WEIGHTS)
    if weights:
        unknown = set(weights) - set(DEFAULT_WEIGHTS)
        if unknown:
            raise ValueError(f"weight given for unknown component(s): {sorted(unknown)}")
        w.update({k: float(v) for k, v in weights.items()})
    unknown = set(components) - set(DEFAULT_WEIGHTS)
    if unknown:
        raise ValueError(f"no weight for component(s): {sorted(unknown)}")
    # terms are combined in decimal on the shortest float repr, so weights such
    # as 1.1 + 0.3 + 0.01 add up to exactly 1.41 rather than its binary neighbour
    comps, flags, total = {}, [], Decimal(0)
    for name, lam in w.items():
        if name in components:
            v = float(components[name].value)
            if not math.isfinite(v):
                raise ValueError(f"component {name} is not finite: {v}")
            term = Decimal(repr(lam)) * Decimal(repr(v))
            comps[name] = float(term)
            total += term
        else:
            flags.append(f"absent:{name}")
    return LossReport("overall", float(total), comps, {f"lambda_{k}": v for k, v in w.items()}, flags)
