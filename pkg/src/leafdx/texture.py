"""Gray-level co-occurrence matrices and their texture statistics."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, EmptyGlcmError, LeafDxError
from .imaging import RasterImage, to_gray

FEATURE_NAMES = ("contrast", "energy", "dissimilarity", "entropy", "correlation")

# unit step per direction, (dy, dx) with rows growing downwards
_DIRECTION_STEPS = {0: (0, 1), 45: (-1, 1), 90: (-1, 0), 135: (-1, -1)}


@dataclass(frozen=True)
class GlcmConfig:
    levels: int = 8
    distance: int = 1
    directions: tuple[int, ...] = (0, 45, 90, 135)
    symmetric: bool = True
    masked: bool = True

    def __post_init__(self):
        if not 2 <= self.levels <= 256:
            raise ConfigError(f"levels must lie in [2, 256], got {self.levels}")
        if self.distance < 1:
            raise ConfigError("distance must be >= 1")
        if not self.directions:
            raise ConfigError("at least one direction is required")
        bad = [d for d in self.directions if d not in _DIRECTION_STEPS]
        if bad:
            raise ConfigError(f"unsupported directions {bad}; choose from 0, 45, 90, 135")
        if not self.symmetric:
            raise ConfigError("only symmetric GLCMs are supported")

    def offsets(self) -> list[tuple[int, int]]:
        return [(dy * self.distance, dx * self.distance) for dy, dx in map(_DIRECTION_STEPS.get, self.directions)]


@dataclass(frozen=True)
class TextureFeatures:
    contrast: float
    energy: float
    dissimilarity: float
    entropy: float
    correlation: float
    mu: float
    sigma2: float

    def vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES])


def quantize(img: RasterImage | np.ndarray, levels: int) -> np.ndarray:
    """Map intensities in [0, 255] to integer bins ``floor(v * levels / 256)``."""
    if not 2 <= levels <= 256:
        raise ConfigError(f"levels must lie in [2, 256], got {levels}")
    values = img.data[:, :, 0] if isinstance(img, RasterImage) else np.asarray(img, dtype=np.float64)
    return np.clip(np.floor(values * levels / 256.0), 0, levels - 1).astype(np.intp)


def _shifted_pair(arr: np.ndarray, dy: int, dx: int) -> tuple[np.ndarray, np.ndarray]:
    h, w = arr.shape[:2]
    first = arr[max(0, -dy) : h - max(0, dy), max(0, -dx) : w - max(0, dx)]
    second = arr[max(0, dy) : h + min(0, dy), max(0, dx) : w + min(0, dx)]
    return first, second


def compute_glcm(
    q: np.ndarray,
    mask: np.ndarray | None = None,
    offset: tuple[int, int] = (0, 1),
    cfg: GlcmConfig = GlcmConfig(),
) -> np.ndarray:
    """Normalized symmetric co-occurrence matrix for one ``(dy, dx)`` offset.

    With a mask (and ``cfg.masked``), only pairs whose endpoints both fall
    inside the mask are counted.
    """
    q = np.asarray(q)
    if q.size == 0:
        raise LeafDxError("empty grid")
    dy, dx = offset
    if dy == 0 and dx == 0:
        raise ConfigError("GLCM offset must be nonzero")
    n = cfg.levels
    if q.min() < 0 or q.max() >= n:
        raise LeafDxError(f"grid values must lie in [0, {n})")
    a, b = _shifted_pair(q, dy, dx)
    keep = np.ones(a.shape, dtype=bool)
    if mask is not None and cfg.masked:
        ma, mb = _shifted_pair(np.asarray(mask, dtype=bool), dy, dx)
        keep = ma & mb
    counts = np.bincount(a[keep] * n + b[keep], minlength=n * n).reshape(n, n).astype(np.float64)
    counts = counts + counts.T
    total = counts.sum()
    if total == 0:
        raise EmptyGlcmError(f"no valid pixel pairs for offset {offset}")
    return counts / total


def glcm_features(g: np.ndarray) -> TextureFeatures:
    n = g.shape[0]
    i, j = np.indices((n, n), dtype=np.float64)
    contrast = float(np.sum(g * (i - j) ** 2))
    energy = float(np.sum(g * g))
    dissimilarity = float(np.sum(g * np.abs(i - j)))
    nz = g[g > 0]
    entropy = float(-np.sum(nz * np.log(nz)))
    mu = float(np.sum(i * g))
    sigma2 = float(np.sum(g * (i - mu) ** 2))
    if sigma2 < 1e-12:
        correlation = 1.0
    else:
        correlation = float(np.sum(g * (i - mu) * (j - mu)) / sigma2)
    return TextureFeatures(contrast, energy, dissimilarity, entropy, correlation, mu, sigma2)


def _as_mask(mask: RasterImage | np.ndarray | None, shape: tuple[int, int]) -> np.ndarray:
    if mask is None:
        return np.ones(shape, dtype=bool)
    arr = mask.data[:, :, 0] if isinstance(mask, RasterImage) else np.asarray(mask)
    if arr.shape != shape:
        raise LeafDxError(f"mask shape {arr.shape} does not match image shape {shape}")
    return arr > 127 if arr.dtype != bool else arr


def texture_report(img: RasterImage, mask: RasterImage | np.ndarray | None, cfg: GlcmConfig = GlcmConfig()) -> dict:
    """Per-direction features plus their mean, as a JSON-ready dict."""
    gray = to_gray(img)
    region = _as_mask(mask, gray.shape)
    if not region.any():
        raise LeafDxError("empty mask")
    q = quantize(gray, cfg.levels)
    per_direction = {}
    for direction, offset in zip(cfg.directions, cfg.offsets()):
        try:
            per_direction[direction] = glcm_features(compute_glcm(q, region, offset, cfg))
        except EmptyGlcmError:
            continue
    if not per_direction:
        raise EmptyGlcmError("empty GLCM in every direction")
    mean = np.mean([f.vector() for f in per_direction.values()], axis=0)
    return {
        "features": dict(zip(FEATURE_NAMES, mean.tolist())),
        "vector": mean.tolist(),
        "per_direction": {str(d): asdict(f) for d, f in per_direction.items()},
        "mask_pixels": int(region.sum()),
        "config": {
            "levels": cfg.levels,
            "distance": cfg.distance,
            "directions": list(cfg.directions),
            "symmetric": cfg.symmetric,
            "masked": cfg.masked,
        },
    }


def extract_features(img: RasterImage, mask: RasterImage | np.ndarray | None, cfg: GlcmConfig = GlcmConfig()) -> np.ndarray:
    """Direction-averaged ``[contrast, energy, dissimilarity, entropy, correlation]``."""
    return np.array(texture_report(img, mask, cfg)["vector"])
