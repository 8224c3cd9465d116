"""Region-wise evaluation: RMSE / PSNR over shadow (S), non-shadow (NS) and all pixels, plus SSIM.

Errors are measured on the 0-255 scale. Dataset aggregates are per-image means
over filename-sorted pairs.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import ndimage

from .imagecore import Image, ImageIOError, ImageLike, as_array, load_image, rgb_to_lab

__all__ = ["RegionMetrics", "ManifestEntry", "Manifest", "mask_from_threshold",
           "evaluate_pair", "evaluate_dataset", "ssim", "psnr_from_mse",
           "PSNR_CAP", "discover_manifest", "load_manifest"]

PSNR_CAP = 99.0


def mask_from_threshold(shadow: ImageLike, free: ImageLike, t: float = 30.0) -> np.ndarray:
    """Shadow pixels: channel-mean ``|free - shadow| * 255 > t``."""
    s, f = as_array(shadow), as_array(free)
    if s.shape != f.shape:
        raise ValueError(f"shape mismatch: {s.shape} vs {f.shape}")
    if not 0 <= t <= 255:
        raise ValueError(f"threshold must lie in [0, 255], got {t}")
    diff = np.abs(f - s) * 255.0
    if diff.ndim == 3:
        diff = diff.mean(axis=2)
    return diff > t


def psnr_from_mse(mse: float, peak: float = 255.0) -> float:
    if mse <= 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(peak * peak / mse))


def ssim(x: np.ndarray, y: np.ndarray, data_range: float = 255.0, sigma: float = 1.5,
         k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean SSIM of two single-channel images with an 11x11 Gaussian window.

    Local statistics use reflect padding; the 5-pixel border is excluded from
    the mean when the image is large enough to have an interior.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 2:
        raise ValueError(f"ssim expects two equal 2-D arrays, got {x.shape} and {y.shape}")
    c1, c2 = (k1 * data_range) ** 2, (k2 * data_range) ** 2

    def g(a):
        return ndimage.gaussian_filter(a, sigma, mode="reflect", truncate=3.5)

    mx, my = g(x), g(y)
    sxx = g(x * x) - mx * mx
    syy = g(y * y) - my * my
    sxy = g(x * y) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    smap = num / den
    r = 5
    if smap.shape[0] > 2 * r and smap.shape[1] > 2 * r:
        smap = smap[r:-r, r:-r]
    return float(smap.mean())


@dataclass
class RegionMetrics:
    """Metrics of one result/truth pair; ``None`` marks an empty region."""

    psnr_s: Optional[float]
    psnr_ns: Optional[float]
    psnr_all: float
    rmse_s: Optional[float]
    rmse_ns: Optional[float]
    rmse_all: float
    ssim_all: float
    count_s: int
    count_ns: int
    count_all: int
    flags: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)


def _region_mse(err2: np.ndarray, sel: np.ndarray) -> Optional[float]:
    if not sel.any():
        return None
    return float(err2[sel].mean())


def evaluate_pair(result: Image, truth: Image, mask: np.ndarray,
                  rmse_space: str = "rgb") -> RegionMetrics:
    """Per-region RMSE / PSNR (0-255 scale) and whole-image luminance SSIM.

    ``rmse_space="lab"`` measures RMSE in CIELAB units instead; PSNR always uses RGB.
    """
    r, t = as_array(result), as_array(truth)
    if r.shape != t.shape:
        raise ValueError(f"shape mismatch: {r.shape} vs {t.shape}")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != r.shape[:2]:
        raise ValueError(f"mask shape {mask.shape} does not match image {r.shape[:2]}")
    if rmse_space not in ("rgb", "lab"):
        raise ValueError(f"rmse_space must be 'rgb' or 'lab', got {rmse_space!r}")
    rr = r if r.ndim == 3 else r[:, :, None]
    tt = t if t.ndim == 3 else t[:, :, None]
    # per-pixel squared error averaged over channels
    err_rgb = (((rr - tt) * 255.0) ** 2).mean(axis=2)
    if rmse_space == "lab":
        if not (isinstance(result, Image) and isinstance(truth, Image)):
            raise ValueError("LAB RMSE needs sRGB Image inputs")
        err_rmse = ((rgb_to_lab(result).data - rgb_to_lab(truth).data) ** 2).mean(axis=2)
    else:
        err_rmse = err_rgb
    everything = np.ones(mask.shape, dtype=bool)
    flags = []
    out = {}
    for tag, sel in (("s", mask), ("ns", ~mask), ("all", everything)):
        mse_rmse = _region_mse(err_rmse, sel)
        mse_psnr = _region_mse(err_rgb, sel)
        if mse_rmse is None:
            flags.append(f"empty_region:{tag}")
            out[f"rmse_{tag}"] = out[f"psnr_{tag}"] = None
        else:
            out[f"rmse_{tag}"] = math.sqrt(mse_rmse)
            out[f"psnr_{tag}"] = psnr_from_mse(mse_psnr)
    lum = np.array([0.299, 0.587, 0.114])
    if rr.shape[2] == 3:
        yr, yt = rr @ lum * 255.0, tt @ lum * 255.0
    else:
        yr, yt = rr[:, :, 0] * 255.0, tt[:, :, 0] * 255.0
    return RegionMetrics(ssim_all=ssim(yr, yt), count_s=int(mask.sum()),
                         count_ns=int((~mask).sum()), count_all=int(mask.size),
                         flags=flags, **out)


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    name: str
    shadow: str
    free: str
    mask: Optional[str] = None
    result: Optional[str] = None


@dataclass
class Manifest:
    root: str
    entries: list
    dataset: str = "custom"


_SHADOW_DIRS = ("shadow", "test_A", "train_A", "A")
_MASK_DIRS = ("mask", "test_B", "train_B", "B")
_FREE_DIRS = ("shadow_free", "shadow-free", "free", "test_C", "train_C", "C")
_RESULT_DIRS = ("result", "results", "output")
_EXTS = (".png", ".ppm", ".pgm")


def _find(root: Path, names) -> Optional[Path]:
    for n in names:
        if (root / n).is_dir():
            return root / n
    return None


def discover_manifest(root) -> Manifest:
    """Build a manifest from a triplet directory (shadow / mask / shadow_free) or
    a pair directory (shadow / shadow_free, masks by thresholding)."""
    root = Path(root)
    sdir, fdir = _find(root, _SHADOW_DIRS), _find(root, _FREE_DIRS)
    if sdir is None or fdir is None:
        raise ImageIOError(f"{root}: expected 'shadow' and 'shadow_free' subdirectories")
    mdir, rdir = _find(root, _MASK_DIRS), _find(root, _RESULT_DIRS)
    entries = []
    for p in sorted(sdir.iterdir()):
        if p.suffix.lower() not in _EXTS:
            continue
        rel = lambda d: os.path.relpath(d / p.name, root)  # noqa: E731
        entries.append(ManifestEntry(
            name=p.name, shadow=rel(sdir), free=rel(fdir),
            mask=rel(mdir) if mdir is not None else None,
            result=rel(rdir) if rdir is not None else None))
    if not entries:
        raise ImageIOError(f"{root}: no images found in {sdir.name}/")
    return Manifest(root=str(root), entries=entries,
                    dataset="triplet" if mdir is not None else "pair")


def load_manifest(path) -> Manifest:
    """Read a JSON manifest ``{"root", "dataset", "entries": [{"shadow", "free", "mask"?, "result"?}]}``
    or discover one from a dataset directory."""
    path = Path(path)
    if path.is_dir():
        return discover_manifest(path)
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ImageIOError(f"{path}: cannot read manifest ({exc.strerror or exc})") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: manifest is not valid JSON ({exc})") from exc
    root = Path(raw.get("root", "."))
    if not root.is_absolute():
        root = path.parent / root
    entries = []
    for i, e in enumerate(raw.get("entries", [])):
        if "shadow" not in e or "free" not in e:
            raise ValueError(f"{path}: entry {i} needs 'shadow' and 'free'")
        entries.append(ManifestEntry(name=e.get("name", Path(e["shadow"]).name),
                                     shadow=e["shadow"], free=e["free"],
                                     mask=e.get("mask"), result=e.get("result")))
    if not entries:
        raise ValueError(f"{path}: manifest has no entries")
    return Manifest(root=str(root), entries=entries, dataset=raw.get("dataset", "custom"))


_METRIC_KEYS = ("psnr_s", "psnr_ns", "psnr_all", "rmse_s", "rmse_ns", "rmse_all", "ssim_all")


def _load_mask(path: str, shape) -> np.ndarray:
    m = load_image(path).data.mean(axis=2)
    if m.shape != shape:
        raise ValueError(f"{path}: mask size {m.shape} does not match image {shape}")
    return m > 0.5


def evaluate_dataset(manifest: Manifest, masks: str = "auto", threshold: float = 30.0,
                     rmse_space: str = "rgb") -> dict:
    """Evaluate every entry; failures are recorded per entry and skipped in the aggregate.

    ``masks`` is ``"provided"``, ``"threshold"`` or ``"auto"`` (provided when the
    entry has a mask). Each entry compares its ``result`` (or, if absent, the
    shadow input itself) against the shadow-free truth.
    """
    if masks not in ("auto", "provided", "threshold"):
        raise ValueError(f"masks must be auto, provided or threshold, got {masks!r}")
    root = Path(manifest.root)
    per_image, errors = [], []
    for e in sorted(manifest.entries, key=lambda e: e.name):
        try:
            shadow = load_image(root / e.shadow)
            free = load_image(root / e.free)
            result = load_image(root / e.result) if e.result else shadow
            if not (shadow.shape == free.shape == result.shape):
                raise ValueError(f"image sizes differ: shadow {shadow.shape}, "
                                 f"free {free.shape}, result {result.shape}")
            use_provided = masks == "provided" or (masks == "auto" and e.mask)
            if use_provided:
                if not e.mask:
                    raise ValueError("no mask provided for this entry")
                mask = _load_mask(str(root / e.mask), shadow.shape[:2])
                source = "provided"
            else:
                mask = mask_from_threshold(shadow, free, threshold)
                source = f"threshold({threshold:g})"
            m = evaluate_pair(result, free, mask, rmse_space)
            rec = {"name": e.name, "mask_source": source, **m.as_dict()}
            per_image.append(rec)
        except (OSError, ValueError) as exc:
            errors.append({"name": e.name, "error": str(exc)})
    aggregate = {"count": len(per_image), "failed": len(errors)}
    for k in _METRIC_KEYS:
        vals = [r[k] for r in per_image if r[k] is not None]
        aggregate[k] = float(np.mean(vals)) if vals else None
    return {"dataset": manifest.dataset, "per_image": per_image,
            "aggregate": aggregate, "errors": errors}
