"""Image container, raster I/O, sRGB <-> CIELAB conversion and 3x3 brightness normalisation.

Pixel data is always held as ``float64`` with shape ``(height, width, channels)``.
sRGB images are normalised to [0, 1]; LAB images use native ranges
(L in [0, 100], a/b roughly in [-128, 127]). Only the file boundary is 8-bit.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np
from PIL import Image as _PILImage
from scipy import ndimage

__all__ = [
    "ColorSpace",
    "Image",
    "ImageIOError",
    "as_array",
    "load_image",
    "save_image",
    "rgb_to_lab",
    "lab_to_rgb",
    "srgb_to_linear",
    "linear_to_srgb",
    "mean_filter_normalize",
    "luminance",
    "D65_WHITE",
]


class ColorSpace(str, enum.Enum):
    SRGB = "srgb"
    LAB = "lab"
    LINEAR = "linear"


class ImageIOError(OSError):
    """Raised when an image file cannot be read or written."""


@dataclass(frozen=True, eq=False)
class Image:
    """Planar floating-point raster with a colour-space tag.

    ``data`` is stored as a read-only ``(H, W, C)`` float64 array. sRGB data is
    clamped to [0, 1] on construction.
    """

    data: np.ndarray
    colorspace: ColorSpace = ColorSpace.SRGB

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"image data must be 2-D or 3-D, got shape {arr.shape}")
        if arr.shape[2] not in (1, 3):
            raise ValueError(f"image must have 1 or 3 channels, got {arr.shape[2]}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image must be non-empty, got shape {arr.shape}")
        cs = ColorSpace(self.colorspace)
        if cs is ColorSpace.SRGB:
            np.clip(arr, 0.0, 1.0, out=arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "colorspace", cs)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def channel(self, c: int) -> np.ndarray:
        return self.data[:, :, c]

    def __repr__(self):
        return (f"Image({self.height}x{self.width}x{self.channels}, "
                f"colorspace={self.colorspace.value})")


ImageLike = Union[Image, np.ndarray]


def as_array(img: ImageLike) -> np.ndarray:
    """Return the float64 pixel array behind ``img`` (Image or array-like)."""
    if isinstance(img, Image):
        return img.data
    return np.asarray(img, dtype=np.float64)


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _read_netpbm(path: str, raw: bytes) -> np.ndarray:
    magic = raw[:2]
    channels = 3 if magic == b"P6" else 1
    pos = 2
    fields = []
    n = len(raw)
    while len(fields) < 3:
        # skip whitespace and comments
        while pos < n and (raw[pos:pos + 1].isspace() or raw[pos:pos + 1] == b"#"):
            if raw[pos:pos + 1] == b"#":
                while pos < n and raw[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < n and raw[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            if pos >= n:
                raise ImageIOError(f"{path}: unexpected end of file in header")
            raise ImageIOError(f"{path}: malformed header")
        fields.append(int(raw[start:pos]))
    # exactly one whitespace byte separates header and raster
    if pos >= n:
        raise ImageIOError(f"{path}: unexpected end of file")
    pos += 1
    width, height, maxval = fields
    if maxval != 255:
        raise ImageIOError(f"{path}: unsupported bit depth (maxval {maxval}); only 8-bit is supported")
    if width < 1 or height < 1:
        raise ImageIOError(f"{path}: invalid dimensions {width}x{height}")
    need = width * height * channels
    body = raw[pos:pos + need]
    if len(body) < need:
        raise ImageIOError(f"{path}: unexpected end of file "
                           f"(expected {need} raster bytes, got {len(body)})")
    arr = np.frombuffer(body, dtype=np.uint8).reshape(height, width, channels)
    return arr


def _read_png(path: str) -> np.ndarray:
    try:
        with _PILImage.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("I", "I;16", "I;16B", "I;16L", "F"):
                raise ImageIOError(f"{path}: unsupported bit depth (mode {mode}); only 8-bit is supported")
            if mode == "1":
                raise ImageIOError(f"{path}: unsupported color type (1-bit)")
            if mode == "P":
                im = im.convert("RGBA" if "transparency" in im.info else "RGB")
                mode = im.mode
            if mode == "LA":
                im = im.convert("L")
            elif mode == "RGBA":
                im = im.convert("RGB")
            elif mode not in ("L", "RGB"):
                raise ImageIOError(f"{path}: unsupported color type ({mode})")
            arr = np.asarray(im, dtype=np.uint8)
    except ImageIOError:
        raise
    except (OSError, SyntaxError, ValueError) as exc:
        msg = str(exc)
        if "truncated" in msg.lower():
            msg = "unexpected end of file"
        raise ImageIOError(f"{path}: {msg}") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def load_image(path: Union[str, os.PathLike]) -> Image:
    """Read an 8-bit PNG or binary PPM (P6) / PGM (P5) into an sRGB Image scaled by 1/255."""
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ImageIOError(f"{path}: cannot read file ({exc.strerror or exc})") from exc
    if raw.startswith(_PNG_MAGIC):
        arr = _read_png(path)
    elif raw[:2] in (b"P5", b"P6"):
        arr = _read_netpbm(path, raw)
    elif len(raw) < 2:
        raise ImageIOError(f"{path}: unexpected end of file")
    else:
        raise ImageIOError(f"{path}: unsupported format (expected PNG, P5 or P6)")
    return Image(arr.astype(np.float64) / 255.0, ColorSpace.SRGB)


def to_bytes(data: np.ndarray) -> np.ndarray:
    """Quantise [0, 1] values to uint8 by round-half-up of ``clamp(v) * 255``."""
    v = np.clip(np.asarray(data, dtype=np.float64), 0.0, 1.0) * 255.0
    return np.floor(v + 0.5).astype(np.uint8)


def save_image(img: Image, path: Union[str, os.PathLike]) -> None:
    """Write an sRGB Image as an 8-bit PNG."""
    if not isinstance(img, Image) or img.colorspace is not ColorSpace.SRGB:
        raise ValueError("convert to SRGB before saving")
    path = os.fspath(path)
    q = to_bytes(img.data)
    if q.shape[2] == 1:
        q = q[:, :, 0]
    try:
        _PILImage.fromarray(q).save(path, format="PNG")
    except (OSError, ValueError) as exc:
        raise ImageIOError(f"{path}: cannot write file ({exc})") from exc


# ---------------------------------------------------------------------------
# Colour conversion (D65, IEC 61966-2-1 sRGB)
# ---------------------------------------------------------------------------

_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
# reference white = image of sRGB (1, 1, 1), so white maps to a = b = 0 exactly
D65_WHITE = _RGB_TO_XYZ.sum(axis=1)

_DELTA = 6.0 / 29.0


def srgb_to_linear(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(c: np.ndarray) -> np.ndarray:
    c = np.clip(np.asarray(c, dtype=np.float64), 0.0, None)
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * c ** (1.0 / 2.4) - 0.055)


def _f(t):
    return np.where(t > _DELTA ** 3, np.cbrt(t), t / (3 * _DELTA ** 2) + 4.0 / 29.0)


def _finv(t):
    return np.where(t > _DELTA, t ** 3, 3 * _DELTA ** 2 * (t - 4.0 / 29.0))


def _require(img: Image, colorspace: ColorSpace, channels: int | None = None):
    if not isinstance(img, Image):
        raise TypeError(f"expected Image, got {type(img).__name__}")
    if img.colorspace is not colorspace:
        raise ValueError(f"expected {colorspace.value} image, got {img.colorspace.value}")
    if channels is not None and img.channels != channels:
        raise ValueError(f"expected {channels} channels, got {img.channels}")


def rgb_to_lab(img: Image) -> Image:
    """sRGB -> CIE L*a*b* (D65)."""
    _require(img, ColorSpace.SRGB, 3)
    lin = srgb_to_linear(img.data)
    xyz = lin @ _RGB_TO_XYZ.T
    fx, fy, fz = (_f(xyz[..., i] / D65_WHITE[i]) for i in range(3))
    lab = np.stack([116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)], axis=-1)
    return Image(lab, ColorSpace.LAB)


def lab_to_rgb(img: Image) -> Image:
    """CIE L*a*b* (D65) -> sRGB, clamped to [0, 1]."""
    _require(img, ColorSpace.LAB, 3)
    L, a, b = img.data[..., 0], img.data[..., 1], img.data[..., 2]
    fy = (L + 16.0) / 116.0
    fx = fy + a / 500.0
    fz = fy - b / 200.0
    xyz = np.stack([_finv(fx) * D65_WHITE[0], _finv(fy) * D65_WHITE[1],
                    _finv(fz) * D65_WHITE[2]], axis=-1)
    lin = xyz @ _XYZ_TO_RGB.T
    return Image(linear_to_srgb(np.clip(lin, 0.0, 1.0)), ColorSpace.SRGB)


def luminance(img: ImageLike) -> np.ndarray:
    """ITU-R BT.601 luma of an RGB array (or the single channel of a gray one)."""
    arr = as_array(img)
    if arr.ndim == 2:
        return arr
    if arr.shape[2] == 1:
        return arr[:, :, 0]
    return arr[..., 0] * 0.299 + arr[..., 1] * 0.587 + arr[..., 2] * 0.114


# ---------------------------------------------------------------------------
# Brightness normalisation
# ---------------------------------------------------------------------------

def mean_filter_normalize(img: Image, chans: Iterable[int]) -> Image:
    """Replace each selected channel by ``I - mean3x3(I) + mean(I)``.

    The 3x3 neighbourhood mean uses replicate padding at the borders. Channels
    not listed in ``chans`` are copied through unchanged.
    """
    chans: Sequence[int] = sorted(set(int(c) for c in chans))
    if not chans:
        raise ValueError("channel set must be non-empty")
    if any(c < 0 or c >= img.channels for c in chans):
        raise ValueError(f"channel index out of range for {img.channels}-channel image: {chans}")
    if img.height < 3 or img.width < 3:
        raise ValueError(f"image must be at least 3x3, got {img.height}x{img.width}")
    out = np.array(img.data)
    for c in chans:
        ch = img.data[:, :, c]
        local = ndimage.uniform_filter(ch, size=3, mode="nearest")
        out[:, :, c] = ch - local + ch.mean()
    # LAB/LINEAR keep unclamped values; SRGB clamps via the constructor
    return Image(out, img.colorspace)
