"""Image acquisition and preprocessing.

Pixels are held as float64 arrays of shape ``(height, width, channels)`` with
values on the 0..255 scale. Quantization to integers happens only when an
image is written to disk.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from PIL import Image

from .errors import ConfigError, ImageFormatError, LeafDxError

RGB = "RGB"
YCBCR = "YCbCr"
GRAY = "Gray"

_CHANNELS = {RGB: 3, YCBCR: 3, GRAY: 1}

# ITU-R BT.601 studio-swing matrix, 4-digit coefficients.
YCBCR_OFFSET = np.array([16.0, 128.0, 128.0])
YCBCR_MATRIX = np.array(
    [
        [0.2568, 0.5041, 0.0979],
        [-0.1482, -0.2910, 0.4392],
        [0.4392, -0.3678, -0.0714],
    ]
)
_YCBCR_INVERSE = np.linalg.inv(YCBCR_MATRIX)


@dataclass(frozen=True)
class RasterImage:
    """A ``height x width`` raster with one or three real-valued planes."""

    data: np.ndarray
    space: str = RGB

    def __post_init__(self):
        if self.space not in _CHANNELS:
            raise ConfigError(f"unknown color space {self.space!r}")
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] != _CHANNELS[self.space]:
            raise ConfigError(
                f"{self.space} image needs {_CHANNELS[self.space]} planes, got shape {data.shape}"
            )
        if data.shape[0] == 0 or data.shape[1] == 0:
            raise ImageFormatError("zero-dimension image")
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]

    def plane(self, index: int) -> np.ndarray:
        return self.data[:, :, index]


@dataclass(frozen=True)
class GammaParams:
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ConfigError(f"gamma must be > 0, got {self.gamma}")


@dataclass(frozen=True)
class SsimParams:
    window: int = 11
    c1: float = 0.01 ** 2
    c2: float = 0.03 ** 2

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ConfigError("SSIM window must be odd and >= 3")
        if self.c1 <= 0 or self.c2 <= 0:
            raise ConfigError("SSIM constants must be positive")


def _require(img: RasterImage, space: str) -> None:
    if img.space != space:
        raise LeafDxError(f"expected a {space} image, got {img.space}")


# --------------------------------------------------------------------------
# file I/O
# --------------------------------------------------------------------------

def _read_netpbm(raw: bytes) -> np.ndarray:
    """Parse a binary P5 (gray) or P6 (color) file with maxval <= 255."""
    magic = raw[:2]
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError("not a binary PPM/PGM file")
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and raw[pos : pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated PPM/PGM header")
        fields.append(int(raw[start:pos]))
    pos += 1  # single whitespace byte before the raster
    width, height, maxval = fields
    if width == 0 or height == 0:
        raise ImageFormatError("zero-dimension image")
    if not 0 < maxval < 256:
        raise ImageFormatError(f"unsupported PPM/PGM maxval {maxval}")
    channels = 3 if magic == b"P6" else 1
    count = width * height * channels
    body = raw[pos : pos + count]
    if len(body) != count:
        raise ImageFormatError("truncated PPM/PGM raster")
    arr = np.frombuffer(body, dtype=np.uint8).astype(np.float64)
    arr = arr.reshape(height, width, channels)
    if maxval != 255:
        arr = arr * (255.0 / maxval)
    return arr


def _read_array(path: Path) -> np.ndarray:
    if not path.is_file():
        raise ImageFormatError(f"file not found: {path}")
    raw = path.read_bytes()
    if raw[:2] in (b"P5", b"P6"):
        return _read_netpbm(raw)
    if not raw.startswith(b"\x89PNG\r\n\x1a\n"):
        raise ImageFormatError(f"unsupported image format: {path}")
    try:
        with Image.open(path) as im:
            if im.mode in ("L", "LA", "I", "I;16", "1"):
                arr = np.asarray(im.convert("L"), dtype=np.float64)[:, :, None]
            else:
                arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    except OSError as exc:
        raise ImageFormatError(f"unreadable image {path}: {exc}") from exc
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ImageFormatError("zero-dimension image")
    return arr


def load_image(path: str | os.PathLike) -> RasterImage:
    """Read a PNG or binary PPM/PGM file as an RGB image."""
    arr = _read_array(Path(path))
    if arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    return RasterImage(arr, RGB)


def load_gray(path: str | os.PathLike) -> RasterImage:
    """Read a file as a single raw-intensity plane (used for masks).

    Color files are reduced by taking their first channel, which is exact
    for the gray-in-RGB masks other tools tend to write.
    """
    arr = _read_array(Path(path))
    return RasterImage(arr[:, :, :1], GRAY)


def _quantize_for_disk(img: RasterImage) -> np.ndarray:
    if img.space == YCBCR:
        img = ycbcr_to_rgb(img)
    out = np.clip(np.rint(img.data), 0, 255).astype(np.uint8)
    return out


def save_image(img: RasterImage, path: str | os.PathLike) -> None:
    """Write ``img`` as PNG (or PPM/PGM when the suffix asks for it).

    Samples are rounded to the nearest integer and clamped to 0..255. YCbCr
    images are converted back to RGB first.
    """
    path = Path(path)
    out = _quantize_for_disk(img)
    try:
        if path.suffix.lower() in (".ppm", ".pgm"):
            magic = b"P5" if out.shape[2] == 1 else b"P6"
            header = b"%s\n%d %d\n255\n" % (magic, out.shape[1], out.shape[0])
            path.write_bytes(header + out.tobytes())
        else:
            mode = "L" if out.shape[2] == 1 else "RGB"
            pil = Image.fromarray(out[:, :, 0] if mode == "L" else out, mode=mode)
            # fixed compression settings keep the bytes stable across runs
            pil.save(path, format="PNG", optimize=False, compress_level=6)
    except OSError as exc:
        raise LeafDxError(f"cannot write {path}: {exc}") from exc


# --------------------------------------------------------------------------
# geometry and color
# --------------------------------------------------------------------------

def _bilinear_axis(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # pixel-center alignment: dst i samples src (i + 0.5) * n_in / n_out - 0.5
    pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0, n_in - 1)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, pos - lo


def resize(img: RasterImage, w: int, h: int) -> RasterImage:
    """Bilinear resample to ``w x h`` keeping the color space."""
    if w < 1 or h < 1:
        raise ConfigError(f"resize target must be at least 1x1, got {w}x{h}")
    if (h, w) == img.shape:
        return RasterImage(img.data.copy(), img.space)
    y0, y1, fy = _bilinear_axis(img.height, h)
    x0, x1, fx = _bilinear_axis(img.width, w)
    d = img.data
    fx = fx[None, :, None]
    top = d[y0][:, x0] * (1 - fx) + d[y0][:, x1] * fx
    bottom = d[y1][:, x0] * (1 - fx) + d[y1][:, x1] * fx
    fy = fy[:, None, None]
    return RasterImage(top * (1 - fy) + bottom * fy, img.space)


def rgb_to_ycbcr(img: RasterImage) -> RasterImage:
    _require(img, RGB)
    return RasterImage(img.data @ YCBCR_MATRIX.T + YCBCR_OFFSET, YCBCR)


def ycbcr_to_rgb(img: RasterImage) -> RasterImage:
    _require(img, YCBCR)
    rgb = (img.data - YCBCR_OFFSET) @ _YCBCR_INVERSE.T
    return RasterImage(np.clip(rgb, 0.0, 255.0), RGB)


def to_gray(img: RasterImage) -> RasterImage:
    """Luma plane of ``img``; gray images pass through unchanged."""
    if img.space == GRAY:
        return img
    if img.space == RGB:
        img = rgb_to_ycbcr(img)
    return RasterImage(img.data[:, :, :1].copy(), GRAY)


# --------------------------------------------------------------------------
# enhancement
# --------------------------------------------------------------------------

def gamma_degrade(img: RasterImage, p: GammaParams) -> RasterImage:
    """Darken with ``255 * (v / 255) ** gamma``; used to synthesize low-light input."""
    return RasterImage(255.0 * (img.data / 255.0) ** p.gamma, img.space)


def gamma_enhance(img: RasterImage, p: GammaParams) -> RasterImage:
    """Inverse of :func:`gamma_degrade` for a known gamma."""
    return RasterImage(255.0 * (img.data / 255.0) ** (1.0 / p.gamma), img.space)


def ssim(a: RasterImage, b: RasterImage, p: SsimParams = SsimParams()) -> float:
    """Mean structural similarity over all ``window x window`` positions.

    Statistics use a uniform window on intensities rescaled to [0, 1]. Only
    windows fully inside the image contribute.
    """
    _require(a, GRAY)
    _require(b, GRAY)
    if a.shape != b.shape:
        raise LeafDxError(f"SSIM dimension mismatch: {a.shape} vs {b.shape}")
    if p.window > min(a.shape):
        raise LeafDxError(f"SSIM window {p.window} larger than image {a.shape}")

    x = a.data[:, :, 0] / 255.0
    y = b.data[:, :, 0] / 255.0

    def local_mean(arr):
        return sliding_window_view(arr, (p.window, p.window)).mean(axis=(-2, -1))

    mu_x, mu_y = local_mean(x), local_mean(y)
    var_x = local_mean(x * x) - mu_x * mu_x
    var_y = local_mean(y * y) - mu_y * mu_y
    cov = local_mean(x * y) - mu_x * mu_y

    num = (2 * mu_x * mu_y + p.c1) * (2 * cov + p.c2)
    den = (mu_x * mu_x + mu_y * mu_y + p.c1) * (var_x + var_y + p.c2)
    return float(np.mean(num / den))
