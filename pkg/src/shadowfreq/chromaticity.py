"""Shadow-free chromaticity maps by log-chromaticity entropy minimisation.

Pipeline for an sRGB image::

    rgb_to_lab -> 3x3 mean-filter normalisation of L and b -> lab_to_rgb
      -> geometric-mean log-chromaticity -> PCA frame -> entropy sweep over 180 angles
      -> project onto the minimum-entropy direction -> render L1 chromaticity

:func:`illumination_compensate` then matches the rendered map's per-channel
statistics over the non-shadow region to the brightness-normalised image.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .imagecore import (ColorSpace, Image, lab_to_rgb, mean_filter_normalize,
                        rgb_to_lab)
from .mask import SoftMask

__all__ = [
    "EPS", "PLANE_BASIS", "DegenerateInputError", "LogChromaPoints", "PcaBasis",
    "ChromaticityMap", "log_chromaticity", "pca_project", "projection_entropy",
    "entropy_curve", "minimize_entropy", "perception_image", "shadowfree_chromaticity",
    "render_chromaticity", "illumination_compensate", "non_shadow_region", "ANGLES_DEG",
]

#: floor below which a channel value is treated as missing (half an 8-bit step)
EPS = 1.0 / 510.0

#: orthonormal basis (rows) of the plane orthogonal to (1, 1, 1)
PLANE_BASIS = np.array([
    [1.0 / math.sqrt(2.0), -1.0 / math.sqrt(2.0), 0.0],
    [1.0 / math.sqrt(6.0), 1.0 / math.sqrt(6.0), -2.0 / math.sqrt(6.0)],
])

ANGLES_DEG = np.arange(180)


class DegenerateInputError(ValueError):
    """Chromaticity is undefined (e.g. grey content or too few valid pixels)."""


@dataclass(frozen=True)
class LogChromaPoints:
    """2-D log-chromaticity coordinates of the valid pixels of an image.

    ``rho`` holds the 3-vectors ``log(c / geomean(c))`` (zero-sum), ``coords``
    their coordinates in a 2-D frame, ``pixel_index`` the (row, col) of each.
    """

    coords: np.ndarray
    pixel_index: np.ndarray
    rho: Optional[np.ndarray] = None
    shape: Optional[tuple] = None
    excluded: int = 0

    @property
    def count(self) -> int:
        return len(self.coords)

    @classmethod
    def from_coords(cls, coords) -> "LogChromaPoints":
        coords = np.asarray(coords, dtype=np.float64)
        idx = np.stack([np.arange(len(coords)), np.zeros(len(coords), dtype=int)], axis=1)
        return cls(coords=coords, pixel_index=idx)


def log_chromaticity(img: Image) -> LogChromaPoints:
    """Geometric-mean log-chromaticity of every pixel whose channels all exceed :data:`EPS`."""
    if not isinstance(img, Image) or img.channels != 3:
        raise ValueError("log_chromaticity needs a 3-channel image")
    data = img.data
    valid = np.all(data > EPS, axis=2)
    rows, cols = np.nonzero(valid)
    logs = np.log(data[rows, cols])
    rho = logs - logs.mean(axis=1, keepdims=True)
    coords = rho @ PLANE_BASIS.T
    return LogChromaPoints(coords=coords, pixel_index=np.stack([rows, cols], axis=1),
                           rho=rho, shape=data.shape[:2],
                           excluded=int(valid.size - valid.sum()))


@dataclass(frozen=True)
class PcaBasis:
    mean: np.ndarray
    axes: np.ndarray
    eigenvalues: np.ndarray
    discarded_eigenvalue: float = 0.0

    def project(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) @ self.axes.T

    def reconstruct(self, y: np.ndarray) -> np.ndarray:
        return self.mean + np.asarray(y, dtype=np.float64) @ self.axes


def _fix_sign(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > tol)
    if len(nz) and v[nz[0]] < 0:
        return -v
    return v


def pca_project(points: np.ndarray) -> PcaBasis:
    """Top-two principal axes of a cloud of 3-D samples.

    Axes come in descending eigenvalue order, each signed so that its first
    non-negligible component is positive.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != 3:
        raise ValueError(f"expected (n, 3) samples, got shape {x.shape}")
    if len(x) < 3:
        raise DegenerateInputError(f"PCA needs at least 3 samples, got {len(x)}")
    mean = x.mean(axis=0)
    centred = x - mean
    if not np.any(np.abs(centred) > 1e-12):
        raise DegenerateInputError("PCA input is degenerate: all samples identical")
    cov = centred.T @ centred / len(x)
    w, v = np.linalg.eigh(cov)
    order = np.argsort(w)[::-1]
    w, v = np.clip(w[order], 0.0, None), v[:, order]
    axes = np.stack([_fix_sign(v[:, 0]), _fix_sign(v[:, 1])])
    return PcaBasis(mean=mean, axes=axes, eigenvalues=w[:2].copy(),
                    discarded_eigenvalue=float(w[2]))


def _coords(points: Union[LogChromaPoints, np.ndarray]) -> np.ndarray:
    if isinstance(points, LogChromaPoints):
        return points.coords
    return np.asarray(points, dtype=np.float64)


def _entropy_1d(values: np.ndarray) -> float:
    lo, hi = np.percentile(values, [5.0, 95.0])
    kept = values[(values >= lo) & (values <= hi)]
    n = len(kept)
    if n < 2:
        raise DegenerateInputError(f"fewer than 2 points survive outlier rejection ({n})")
    sigma = kept.std()
    span = kept.max() - kept.min()
    # spans at round-off level count as a single point
    if sigma == 0.0 or span <= 1e-12 * max(1.0, float(np.abs(kept).max())):
        return 0.0
    width = 3.5 * sigma * n ** (-1.0 / 3.0)
    bins = max(1, int(math.ceil(span / width)))
    hist, _ = np.histogram(kept, bins=bins, range=(kept.min(), kept.max()))
    p = hist[hist > 0] / n
    return float(-(p * np.log(p)).sum())


def projection_entropy(points: Union[LogChromaPoints, np.ndarray], theta: float) -> float:
    """Shannon entropy (nats) of the 1-D projection onto ``(cos theta, sin theta)``.

    Values outside the 5th-95th percentile band are discarded and the rest
    binned with Scott's rule, ``3.5 * std * n ** (-1/3)``.
    """
    xy = _coords(points)
    if len(xy) < 2:
        raise DegenerateInputError(f"need at least 2 points, got {len(xy)}")
    proj = xy[:, 0] * math.cos(theta) + xy[:, 1] * math.sin(theta)
    return _entropy_1d(proj)


def entropy_curve(points: Union[LogChromaPoints, np.ndarray],
                  angles_deg: np.ndarray = ANGLES_DEG) -> np.ndarray:
    return np.array([projection_entropy(points, math.radians(a)) for a in angles_deg])


def minimize_entropy(points: Union[LogChromaPoints, np.ndarray]) -> tuple[float, np.ndarray]:
    """Sweep 0..179 degrees; return (theta_star in radians, entropy curve).

    Ties resolve to the smallest angle.
    """
    curve = entropy_curve(points)
    k = int(np.argmin(curve))
    return math.radians(float(ANGLES_DEG[k])), curve


# ---------------------------------------------------------------------------
# Full pipeline
# ---------------------------------------------------------------------------

def perception_image(img: Image) -> Image:
    """Brightness-normalised 'shadow-free perceived' image: 3x3 mean filtering of L and b in LAB."""
    lab = rgb_to_lab(img)
    return lab_to_rgb(mean_filter_normalize(lab, (0, 2)))


@dataclass(frozen=True)
class ChromaticityMap:
    """Rendered invariant chromaticity of an image plus the projection that produced it.

    ``raw`` is the unclamped L1 chromaticity ``(H, W, 3)``; :attr:`image` applies
    the per-channel affine correction ``gain * raw + bias`` and clamps to [0, 1].
    ``theta_star`` is measured in the PCA frame ``basis``.
    """

    raw: np.ndarray
    theta_star: float
    entropy_curve: np.ndarray
    basis: PcaBasis
    excluded_pixels: int = 0
    normalized_brightness: bool = True
    gain: np.ndarray = dataclasses.field(default_factory=lambda: np.ones(3))
    bias: np.ndarray = dataclasses.field(default_factory=lambda: np.zeros(3))

    @property
    def corrected(self) -> np.ndarray:
        return self.raw * self.gain + self.bias

    @property
    def image(self) -> Image:
        return Image(self.corrected, ColorSpace.SRGB)

    @property
    def theta_star_degrees(self) -> float:
        return math.degrees(self.theta_star)

    @property
    def invariant_direction(self) -> np.ndarray:
        """Unit 3-vector (zero-sum) of the projection direction in log-chromaticity space."""
        e = np.array([math.cos(self.theta_star), math.sin(self.theta_star)])
        d = e @ self.basis.axes
        return d / np.linalg.norm(d)

    @property
    def theta_plane_degrees(self) -> float:
        """Projection direction expressed in the fixed :data:`PLANE_BASIS` frame, in [0, 180)."""
        d = PLANE_BASIS @ self.invariant_direction
        return math.degrees(math.atan2(d[1], d[0])) % 180.0


def _render(img: Image, basis: PcaBasis, theta: float, normalize: bool) -> tuple[np.ndarray, int]:
    src = perception_image(img) if normalize else img
    pts = log_chromaticity(src)
    out = np.full(src.data.shape, 1.0 / 3.0)
    if pts.count:
        e = np.array([math.cos(theta), math.sin(theta)])
        s = basis.project(pts.rho) @ e
        rho = basis.mean + np.outer(s, e @ basis.axes)
        c = np.exp(rho)
        out[pts.pixel_index[:, 0], pts.pixel_index[:, 1]] = c / c.sum(axis=1, keepdims=True)
    return out, pts.excluded


def shadowfree_chromaticity(img: Image, normalize_brightness: bool = True) -> ChromaticityMap:
    """Entropy-minimised invariant chromaticity map of an sRGB image.

    With ``normalize_brightness=False`` the mean-filter stage is skipped, which
    gives the plain physics-based baseline map for comparison.
    """
    if not isinstance(img, Image) or img.colorspace is not ColorSpace.SRGB or img.channels != 3:
        raise ValueError("shadowfree_chromaticity needs a 3-channel SRGB image")
    src = perception_image(img) if normalize_brightness else img
    pts = log_chromaticity(src)
    if pts.count < 3:
        raise DegenerateInputError("too few non-black pixels for a chromaticity map")
    if not np.any(np.abs(pts.rho) > 1e-9):
        raise DegenerateInputError("chromaticity undefined: image content is grey (R=G=B)")
    basis = pca_project(pts.rho)
    frame = LogChromaPoints(coords=basis.project(pts.rho), pixel_index=pts.pixel_index)
    theta, curve = minimize_entropy(frame)
    raw, excluded = _render(img, basis, theta, normalize_brightness)
    return ChromaticityMap(raw=raw, theta_star=theta, entropy_curve=curve, basis=basis,
                           excluded_pixels=excluded, normalized_brightness=normalize_brightness)


def render_chromaticity(img: Image, ref: ChromaticityMap) -> np.ndarray:
    """Chromaticity of ``img`` under ``ref``'s projection and affine correction (unclamped)."""
    if not isinstance(img, Image) or img.channels != 3:
        raise ValueError("render_chromaticity needs a 3-channel image")
    raw, excluded = _render(img, ref.basis, ref.theta_star, ref.normalized_brightness)
    if excluded == img.height * img.width:
        raise DegenerateInputError("chromaticity undefined: no pixel above the black floor")
    return raw * ref.gain + ref.bias


def non_shadow_region(img: Image, mask: Optional[SoftMask] = None) -> np.ndarray:
    """Boolean map of the pixels treated as lit.

    With a mask, lit means ``m1 <= 0``; otherwise the brightest half by LAB L.
    """
    if mask is not None:
        if mask.shape != (img.height, img.width):
            raise ValueError(f"mask shape {mask.shape} does not match image {img.shape[:2]}")
        return mask.m1 <= 0.0
    L = rgb_to_lab(img).data[:, :, 0]
    return L >= np.median(L)


def illumination_compensate(cmap: ChromaticityMap, img: Image,
                            mask: Optional[SoftMask] = None,
                            reference: str = "perceived") -> ChromaticityMap:
    """Per-channel gain/bias so the map's lit-region mean/std match a reference image.

    ``reference="perceived"`` samples the lit pixels from the brightness-normalised
    image (the map's own source); ``reference="input"`` samples them from ``img``
    itself, which keeps the lit-region brightness of the input.
    """
    if cmap.raw.shape[:2] != (img.height, img.width):
        raise ValueError("chromaticity map and image differ in size")
    if reference not in ("perceived", "input"):
        raise ValueError(f"reference must be 'perceived' or 'input', got {reference!r}")
    region = non_shadow_region(img, mask)
    if not region.any():
        raise ValueError("non-shadow region is empty")
    if reference == "perceived" and cmap.normalized_brightness:
        ref = perception_image(img)
    else:
        ref = img
    cur = cmap.corrected[region]
    tgt = ref.data[region]
    mu_c, sd_c = cur.mean(axis=0), cur.std(axis=0)
    mu_t, sd_t = tgt.mean(axis=0), tgt.std(axis=0)
    gain = np.where(sd_c > 0, sd_t / np.where(sd_c > 0, sd_c, 1.0), 1.0)
    bias = mu_t - gain * mu_c
    return dataclasses.replace(cmap, gain=cmap.gain * gain, bias=cmap.bias * gain + bias)
