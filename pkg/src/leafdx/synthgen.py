"""Deterministic synthetic leaf images with ground-truth lesion masks.

Every sample is a green ellipse on a near-white background carrying brown
lesions whose geometry and internal texture depend on the disease class:

* Blight: one or two large irregular patches with blotchy two-tone interior.
* Anthracnose: uniformly dark necrosis along part of the leaf margin.
* Canker: a few ring lesions, dark outer annulus and alternating bands inside.
* LeafSpot: many small round spots with a per-pixel two-tone speckle.

Lesion pixels take one of two brown tones whose luma sits mid-bin for an
8-level gray quantization, so texture statistics reflect the pattern rather
than the noise.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, LeafDxError
from .imaging import GRAY, RGB, YCBCR_MATRIX, RasterImage, resize, save_image

BLIGHT = "Blight"
ANTHRACNOSE = "Anthracnose"
CANKER = "Canker"
LEAFSPOT = "LeafSpot"
CLASSES = (BLIGHT, ANTHRACNOSE, CANKER, LEAFSPOT)

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = "leafdx-synth/1"

# colors (RGB) before per-sample jitter
LEAF_GREEN = (60.0, 140.0, 50.0)
LESION_BROWN = (150.0, 85.0, 40.0)
BACKGROUND = (238.0, 238.0, 232.0)
COLOR_JITTER = 10.0
# target luma of the two lesion tones; centers of gray bins 2 and 3 (of 8)
DARK_LUMA = 80.0
LIGHT_LUMA = 112.0

LEAF_SEMI_MAJOR = 0.40  # fraction of image size
LEAF_SEMI_MINOR = 0.25
LEAF_JITTER = 0.05

BLIGHT_PATCHES = (1, 2)
BLIGHT_AREA = (0.15, 0.25)  # total fraction of leaf area
BLIGHT_MIN_AREA = 0.08
BLIGHT_BLOTCH = 16  # pixels per blotch cell
ANTHRACNOSE_SPAN_DEG = (120.0, 200.0)
ANTHRACNOSE_DEPTH = (0.15, 0.22)  # band depth, fraction of normalized radius
CANKER_RINGS = (2, 4)
CANKER_RADIUS = (6.0, 10.0)
CANKER_BAND = 3.0  # pixels per ring band
LEAFSPOT_SPOTS = (5, 12)
LEAFSPOT_RADIUS = (2.5, 3.5)
LEAFSPOT_MAX_AREA = 0.01


@dataclass(frozen=True)
class SynthConfig:
    classes: tuple[str, ...] = CLASSES
    per_class: int = 10
    size: int = 128
    seed: int = 0
    noise_sigma: float = 3.0

    def __post_init__(self):
        unknown = [c for c in self.classes if c not in CLASSES]
        if unknown or not self.classes:
            raise ConfigError(f"classes must be a non-empty subset of {CLASSES}, got {self.classes}")
        if self.per_class < 1:
            raise ConfigError("per_class must be >= 1")
        if self.size < 64:
            raise ConfigError("size must be >= 64")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")


@dataclass
class SynthSample:
    image: RasterImage
    mask: RasterImage
    label: str
    leaf: np.ndarray  # boolean leaf-ellipse support

    @property
    def lesion_fraction(self) -> float:
        return float((self.mask.data[:, :, 0] > 0).sum() / self.leaf.sum())


def _tone(base: np.ndarray, luma: float) -> np.ndarray:
    """Scale an RGB color so its Y component equals ``luma``."""
    y = YCBCR_MATRIX[0] @ base
    return base * (luma - 16.0) / y


class _Leaf:
    def __init__(self, size: int, rng: np.random.Generator):
        self.size = size
        self.cy = size / 2 + rng.uniform(-0.05, 0.05) * size
        self.cx = size / 2 + rng.uniform(-0.05, 0.05) * size
        self.a = LEAF_SEMI_MAJOR * size * (1 + rng.uniform(-LEAF_JITTER, LEAF_JITTER))
        self.b = LEAF_SEMI_MINOR * size * (1 + rng.uniform(-LEAF_JITTER, LEAF_JITTER))
        self.theta = rng.uniform(0, np.pi)
        yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
        self.yy, self.xx = yy, xx
        dy, dx = yy - self.cy, xx - self.cx
        c, s = np.cos(self.theta), np.sin(self.theta)
        self.u = (dx * c + dy * s) / self.a
        self.v = (-dx * s + dy * c) / self.b
        self.rho = np.hypot(self.u, self.v)
        self.phi = np.arctan2(self.v, self.u)
        self.mask = self.rho <= 1.0

    def point(self, rho: float, phi: float) -> tuple[float, float]:
        """Image (y, x) of a point given in normalized leaf polar coordinates."""
        u, v = rho * np.cos(phi) * self.a, rho * np.sin(phi) * self.b
        c, s = np.cos(self.theta), np.sin(self.theta)
        return self.cy + u * s + v * c, self.cx + u * c - v * s

    def random_point(self, rng: np.random.Generator, max_rho: float) -> tuple[float, float]:
        return self.point(max_rho * np.sqrt(rng.uniform()), rng.uniform(0, 2 * np.pi))


def _blotches(size: int, rng: np.random.Generator) -> np.ndarray:
    cells = size // BLIGHT_BLOTCH + 2
    coarse = RasterImage(rng.normal(size=(cells, cells)), GRAY)
    return resize(coarse, size, size).data[:, :, 0] > 0


def _blight(leaf: _Leaf, rng: np.random.Generator):
    n = int(rng.integers(BLIGHT_PATCHES[0], BLIGHT_PATCHES[1] + 1))
    target = rng.uniform(*BLIGHT_AREA) * leaf.mask.sum()
    leaf_area = leaf.mask.sum()
    radius = np.sqrt(target / n / np.pi)
    centers = [leaf.random_point(rng, 0.45) for _ in range(n)]
    phases = rng.uniform(0, 2 * np.pi, size=(n, 2))
    while True:
        lesion = np.zeros_like(leaf.mask)
        for (cy, cx), (p3, p5) in zip(centers, phases):
            ang = np.arctan2(leaf.yy - cy, leaf.xx - cx)
            r = radius * (1 + 0.25 * np.sin(3 * ang + p3) + 0.15 * np.sin(5 * ang + p5))
            lesion |= np.hypot(leaf.yy - cy, leaf.xx - cx) <= r
        lesion &= leaf.mask
        if lesion.sum() >= BLIGHT_MIN_AREA * leaf_area:
            break
        radius *= 1.1
    dark = _blotches(leaf.size, rng)
    return lesion, dark


def _anthracnose(leaf: _Leaf, rng: np.random.Generator):
    span = np.deg2rad(rng.uniform(*ANTHRACNOSE_SPAN_DEG))
    start = rng.uniform(-np.pi, np.pi)
    depth = rng.uniform(*ANTHRACNOSE_DEPTH)
    wobble = rng.uniform(0, 2 * np.pi)
    rel = np.mod(leaf.phi - start, 2 * np.pi)
    inner = 1.0 - depth * (1 + 0.3 * np.sin(6 * leaf.phi + wobble))
    lesion = leaf.mask & (rel <= span) & (leaf.rho >= inner)
    dark = np.ones_like(lesion)
    return lesion, dark


def _canker(leaf: _Leaf, rng: np.random.Generator):
    lesion = np.zeros_like(leaf.mask)
    depth = np.full(leaf.mask.shape, np.inf)
    for _ in range(int(rng.integers(CANKER_RINGS[0], CANKER_RINGS[1] + 1))):
        cy, cx = leaf.random_point(rng, 0.6)
        radius = rng.uniform(*CANKER_RADIUS)
        dist = np.hypot(leaf.yy - cy, leaf.xx - cx)
        disk = dist <= radius
        # band index counted inwards from the rim; rim band is dark
        d = np.where(disk, radius - dist, np.inf)
        depth = np.minimum(depth, d)
        lesion |= disk
    lesion &= leaf.mask
    band = np.floor(np.where(lesion, depth, 0.0) / CANKER_BAND)
    dark = lesion & (band % 2 == 0)
    return lesion, dark


def _leafspot(leaf: _Leaf, rng: np.random.Generator):
    lesion = np.zeros_like(leaf.mask)
    max_r = np.sqrt(LEAFSPOT_MAX_AREA * leaf.mask.sum() / np.pi)
    for _ in range(int(rng.integers(LEAFSPOT_SPOTS[0], LEAFSPOT_SPOTS[1] + 1))):
        cy, cx = leaf.random_point(rng, 0.8)
        radius = min(rng.uniform(*LEAFSPOT_RADIUS), max_r)
        lesion |= np.hypot(leaf.yy - cy, leaf.xx - cx) <= radius
    lesion &= leaf.mask
    dark = rng.uniform(size=lesion.shape) < 0.5
    return lesion, dark


_PAINTERS = {BLIGHT: _blight, ANTHRACNOSE: _anthracnose, CANKER: _canker, LEAFSPOT: _leafspot}


def sample_seed(seed: int, index: int) -> np.random.SeedSequence:
    """Independent stream for sample ``index``; order-independent by construction."""
    return np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, index])


def generate_one(label: str, size: int, noise_sigma: float, seed: np.random.SeedSequence) -> SynthSample:
    if label not in _PAINTERS:
        raise ConfigError(f"unknown class {label!r}")
    rng = np.random.default_rng(seed)
    leaf = _Leaf(size, rng)
    green = np.asarray(LEAF_GREEN) + rng.uniform(-COLOR_JITTER, COLOR_JITTER, 3)
    brown = np.asarray(LESION_BROWN) + rng.uniform(-COLOR_JITTER, COLOR_JITTER, 3)
    background = np.asarray(BACKGROUND) + rng.uniform(-3, 3, 3)

    lesion, dark = _PAINTERS[label](leaf, rng)
    img = np.empty((size, size, 3))
    img[:] = background
    img[leaf.mask] = green
    img[lesion & dark] = _tone(brown, DARK_LUMA)
    img[lesion & ~dark] = _tone(brown, LIGHT_LUMA)
    noise = rng.normal(0.0, 1.0, img.shape)
    if noise_sigma > 0:
        img = img + noise_sigma * noise
    img = np.clip(img, 0.0, 255.0)
    mask = RasterImage(np.where(lesion, 255.0, 0.0), GRAY)
    return SynthSample(RasterImage(img, RGB), mask, label, leaf.mask)


def generate(cfg: SynthConfig) -> list[SynthSample]:
    """All samples, grouped by class in ``cfg.classes`` order."""
    samples = []
    for ci, label in enumerate(cfg.classes):
        for k in range(cfg.per_class):
            index = ci * cfg.per_class + k
            samples.append(generate_one(label, cfg.size, cfg.noise_sigma, sample_seed(cfg.seed, index)))
    return samples


def export_dataset(samples: list[SynthSample], root: str | os.PathLike, seed: int | None = None) -> dict:
    """Write ``<root>/<label>/<index>.png`` plus masks and a JSON manifest."""
    root = Path(root)
    records = []
    counters: dict[str, int] = {}
    try:
        for sample in samples:
            index = counters.get(sample.label, 0)
            counters[sample.label] = index + 1
            folder = root / sample.label
            folder.mkdir(parents=True, exist_ok=True)
            image_path = folder / f"{index:04d}.png"
            mask_path = folder / f"{index:04d}.mask.png"
            save_image(sample.image, image_path)
            save_image(sample.mask, mask_path)
            records.append(
                {
                    "image": image_path.relative_to(root).as_posix(),
                    "mask": mask_path.relative_to(root).as_posix(),
                    "label": sample.label,
                    "sha256": hashlib.sha256(image_path.read_bytes()).hexdigest(),
                }
            )
        manifest = {"version": MANIFEST_VERSION, "seed": seed, "samples": records}
        (root / MANIFEST_NAME).write_text(json.dumps(manifest, indent=1) + "\n")
    except OSError as exc:
        raise LeafDxError(f"cannot export dataset to {root}: {exc}") from exc
    return manifest


def read_manifest(root: str | os.PathLike) -> dict:
    path = Path(root) / MANIFEST_NAME
    try:
        manifest = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise LeafDxError(f"cannot read manifest {path}: {exc}") from exc
    if manifest.get("version") != MANIFEST_VERSION:
        raise LeafDxError(f"unsupported manifest version {manifest.get('version')!r}")
    return manifest
