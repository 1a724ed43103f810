"""End-to-end orchestration: acquisition, segmentation, features, SVM.

The command-line tool and the acceptance suite both drive this module, so a
given :class:`PipelineConfig` produces the same numbers either way.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .classifier import Dataset, KernelSpec, MulticlassModel, train_multiclass
from .errors import ConfigError, LeafDxError
from .imaging import GammaParams, RasterImage, gamma_enhance, load_image, resize, rgb_to_ycbcr
from .segmentation import GaConfig, GaResult, extract_cluster_mask, run_ga, select_diseased_cluster
from .synthgen import MANIFEST_NAME, read_manifest
from .texture import FEATURE_NAMES, GlcmConfig, texture_report

CONFIG_SCHEMA = 1
VERSION_TAG = f"leafdx-{__version__}"


@contextmanager
def stage(name: str):
    """Prefix domain errors raised inside the block with the stage name."""
    try:
        yield
    except LeafDxError as exc:
        if str(exc).startswith(f"[{name}]"):
            raise
        raise type(exc)(f"[{name}] {exc}") from exc


def derive_seed(master: int, purpose: str) -> int:
    """Deterministic 63-bit sub-seed for one pipeline stage."""
    tag = [ord(ch) for ch in purpose]
    return int(np.random.SeedSequence([master & 0xFFFFFFFFFFFFFFFF, *tag]).generate_state(2, np.uint64)[0] >> 1)


@dataclass(frozen=True)
class SvmParams:
    c: float = 10.0
    tol: float = 1e-3
    max_passes: int = 200


@dataclass(frozen=True)
class PipelineConfig:
    resize: tuple[int, int] | None = (250, 250)
    gamma: float | None = None  # known degradation gamma to undo; None skips enhancement
    enhance_first: bool = False  # True: enhance before resizing
    ga: GaConfig = field(default_factory=lambda: GaConfig(max_pixels=4096))
    glcm: GlcmConfig = field(default_factory=GlcmConfig)
    kernel: KernelSpec = field(default_factory=KernelSpec)
    svm: SvmParams = field(default_factory=SvmParams)
    border_fraction_threshold: float = 0.25
    cluster_override: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.resize is not None:
            w, h = self.resize
            if w < 1 or h < 1:
                raise ConfigError(f"resize must be positive, got {self.resize}")
        if self.gamma is not None:
            GammaParams(self.gamma)
        if not 0.0 <= self.border_fraction_threshold <= 1.0:
            raise ConfigError("border_fraction_threshold must lie in [0, 1]")

    @property
    def ga_effective(self) -> GaConfig:
        return dataclasses.replace(self.ga, seed=derive_seed(self.seed, "ga"))

    @property
    def svm_seed(self) -> int:
        return derive_seed(self.seed, "svm")

    def to_dict(self) -> dict:
        ga = dataclasses.asdict(self.ga)
        ga.pop("seed")
        glcm = dataclasses.asdict(self.glcm)
        glcm["directions"] = list(glcm["directions"])
        return {
            "schema": CONFIG_SCHEMA,
            "seed": self.seed,
            "resize": list(self.resize) if self.resize is not None else None,
            "gamma": self.gamma,
            "enhance_first": self.enhance_first,
            "ga": ga,
            "glcm": glcm,
            "kernel": self.kernel.to_dict(),
            "svm": dataclasses.asdict(self.svm),
            "border_fraction_threshold": self.border_fraction_threshold,
            "cluster_override": self.cluster_override,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        doc = dict(doc)
        schema = doc.pop("schema", CONFIG_SCHEMA)
        if schema != CONFIG_SCHEMA:
            raise ConfigError(f"unsupported config schema {schema!r}")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        base = cls()
        try:
            ga = dataclasses.replace(base.ga, **doc.pop("ga", {}))
            glcm_doc = dict(doc.pop("glcm", {}))
            if "directions" in glcm_doc:
                glcm_doc["directions"] = tuple(glcm_doc["directions"])
            glcm = dataclasses.replace(base.glcm, **glcm_doc)
            kernel = dataclasses.replace(base.kernel, **doc.pop("kernel", {}))
            svm = dataclasses.replace(base.svm, **doc.pop("svm", {}))
            if doc.get("resize") is not None:
                doc["resize"] = tuple(doc["resize"])
            return dataclasses.replace(base, ga=ga, glcm=glcm, kernel=kernel, svm=svm, **doc)
        except TypeError as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    @classmethod
    def load(cls, path: str | os.PathLike) -> "PipelineConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)


# --------------------------------------------------------------------------
# per-image stages
# --------------------------------------------------------------------------

@dataclass
class Segmentation:
    rgb: RasterImage    # preprocessed RGB image the clusters refer to
    ycbcr: RasterImage
    ga: GaResult
    diseased: int

    def mask(self, cluster: int | None = None) -> RasterImage:
        cluster = self.diseased if cluster is None else cluster
        return extract_cluster_mask(self.ga.assignment, cluster, self.rgb.width, self.rgb.height)


def preprocess(img: RasterImage, cfg: PipelineConfig) -> RasterImage:
    """Resize and (optionally) gamma-enhance in the configured order."""
    steps = []
    if cfg.resize is not None:
        steps.append(lambda im: resize(im, *cfg.resize))
    if cfg.gamma is not None:
        enhance = lambda im: gamma_enhance(im, GammaParams(cfg.gamma))  # noqa: E731
        steps.insert(0 if cfg.enhance_first else len(steps), enhance)
    for step in steps:
        img = step(img)
    return img


def segment(img: RasterImage, cfg: PipelineConfig) -> Segmentation:
    with stage("preprocess"):
        rgb = preprocess(img, cfg)
    with stage("convert"):
        ycbcr = rgb_to_ycbcr(rgb)
    with stage("segment"):
        result = run_ga(ycbcr, cfg.ga_effective)
    with stage("select"):
        diseased = select_diseased_cluster(
            result.assignment, ycbcr, cfg.border_fraction_threshold, cfg.cluster_override
        )
    return Segmentation(rgb, ycbcr, result, diseased)


def features_for(img: RasterImage, mask: RasterImage | None, cfg: PipelineConfig) -> dict:
    with stage("features"):
        return texture_report(img, mask, cfg.glcm)


def image_features(img: RasterImage, cfg: PipelineConfig) -> np.ndarray:
    """Segment an RGB image and return the lesion's 5-feature vector."""
    seg = segment(img, cfg)
    return np.array(features_for(seg.rgb, seg.mask(), cfg)["vector"])


def path_features(path: str | os.PathLike, cfg: PipelineConfig) -> np.ndarray:
    with stage("load"):
        img = load_image(path)
    return image_features(img, cfg)


# --------------------------------------------------------------------------
# datasets
# --------------------------------------------------------------------------

def list_images(root: str | os.PathLike) -> list[tuple[Path, str]]:
    """``(path, label)`` pairs from a manifest or a ``<root>/<label>/*.png`` tree."""
    root = Path(root)
    if (root / MANIFEST_NAME).is_file():
        manifest = read_manifest(root)
        return [(root / rec["image"], rec["label"]) for rec in manifest["samples"]]
    if not root.is_dir():
        raise LeafDxError(f"dataset root not found: {root}")
    items = []
    for label_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for path in sorted(label_dir.glob("*.png")):
            if not path.name.endswith(".mask.png"):
                items.append((path, label_dir.name))
    return items


def read_feature_csv(path: str | os.PathLike) -> Dataset:
    """Rows of ``label,f1,...,f5``; an optional header starting with ``label`` is skipped."""
    rows, labels = [], []
    try:
        with open(path, newline="") as fh:
            for i, row in enumerate(csv.reader(fh)):
                if not row or (i == 0 and row[0].strip().lower() == "label"):
                    continue
                labels.append(row[0])
                rows.append([float(v) for v in row[1:]])
    except (OSError, ValueError) as exc:
        raise LeafDxError(f"cannot read feature CSV {path}: {exc}") from exc
    if not rows:
        raise LeafDxError(f"feature CSV {path} holds no rows")
    if len({len(r) for r in rows}) != 1:
        raise LeafDxError("feature CSV rows differ in length")
    return Dataset(np.array(rows), labels)


def csv_header() -> list[str]:
    return ["label", *FEATURE_NAMES]


def load_dataset(source: str | os.PathLike, cfg: PipelineConfig, progress=None) -> Dataset:
    """Feature dataset from a feature CSV or by featurizing an image tree."""
    source = Path(source)
    if source.is_file():
        return read_feature_csv(source)
    items = list_images(source)
    if not items:
        raise LeafDxError(f"no images under {source}")
    rows = []
    for path, label in items:
        with stage(f"{path}"):
            rows.append(path_features(path, cfg))
        if progress:
            progress(path, label)
    return Dataset(np.array(rows), [label for _, label in items])


def stratified_split(labels: list[str], eval_per_label: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Boolean train/eval masks holding out ``eval_per_label`` items of every label."""
    rng = np.random.default_rng(seed)
    labels = np.asarray(labels)
    is_eval = np.zeros(len(labels), dtype=bool)
    for lab in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == lab)
        if len(idx) <= eval_per_label:
            raise LeafDxError(f"label {lab!r} has {len(idx)} items; cannot hold out {eval_per_label}")
        is_eval[rng.choice(idx, size=eval_per_label, replace=False)] = True
    return ~is_eval, is_eval


def train(data: Dataset, cfg: PipelineConfig) -> MulticlassModel:
    with stage("train"):
        return train_multiclass(data, cfg.kernel, cfg.svm.c, cfg.svm.tol, cfg.svm_seed, cfg.svm.max_passes)
