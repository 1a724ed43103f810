"""Color clustering of YCbCr pixels with a hybrid genetic algorithm.

A chromosome is a ``(K, 3)`` float array of cluster centers in
``(Y, Cr, Cb)`` order. Fitness is the summed (unsquared) Euclidean distance
from every pixel to its nearest center, so lower is better. Each offspring
gets one assign/mean-update step before it is scored.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, LeafDxError, NoForegroundError
from .imaging import GRAY, YCBCR, RasterImage

Chromosome = np.ndarray

# (Y, Cb, Cr) image planes -> (Y, Cr, Cb) cluster coordinates
_PLANE_ORDER = [0, 2, 1]
CR_AXIS = 1


@dataclass(frozen=True)
class GaConfig:
    k: int = 3
    population_size: int = 20
    generations: int = 50
    crossover_rate: float = 0.9
    mutation_rate: float = 0.1
    mutation_sigma: float = 10.0
    elitism: int = 1
    seed: int = 0
    stagnation_window: int = 10
    # evolve on a fixed random subset of this many pixels; None uses all
    max_pixels: int | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.population_size < 2:
            raise ConfigError("population_size must be >= 2")
        if self.generations < 0:
            raise ConfigError("generations must be >= 0")
        for name in ("crossover_rate", "mutation_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {rate}")
        if self.mutation_sigma < 0:
            raise ConfigError("mutation_sigma must be >= 0")
        if not 0 <= self.elitism <= self.population_size:
            raise ConfigError("elitism must lie in [0, population_size]")
        if self.stagnation_window < 1:
            raise ConfigError("stagnation_window must be >= 1")
        if self.max_pixels is not None and self.max_pixels < self.k:
            raise ConfigError("max_pixels must be >= k")


@dataclass
class ClusterAssignment:
    """Nearest-center labelling of a pixel list.

    ``centroids[i]`` is the mean of cluster ``i``; clusters with no members
    report the center they were assigned against.
    """

    labels: np.ndarray
    counts: np.ndarray
    centroids: np.ndarray
    distances: np.ndarray = field(repr=False)

    @property
    def k(self) -> int:
        return len(self.counts)


@dataclass
class GaResult:
    chromosome: Chromosome
    assignment: ClusterAssignment
    fitness: float
    generations_run: int
    history: list[float]


def image_pixels(img: RasterImage) -> np.ndarray:
    """Flatten a YCbCr image to an ``(m*n, 3)`` array of (Y, Cr, Cb) rows."""
    if img.space != YCBCR:
        raise LeafDxError(f"segmentation needs a YCbCr image, got {img.space}")
    return img.data[:, :, _PLANE_ORDER].reshape(-1, 3)


def _check_pixels(pixels: np.ndarray) -> np.ndarray:
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 2 or pixels.shape[0] == 0:
        raise LeafDxError("empty pixel list")
    return pixels


def _columns(pixels: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(pixels.T)


def _nearest(cols: np.ndarray, chrom: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-center labels and distances for channel-major pixels ``cols``.

    argmin keeps the lowest center index on exact ties.
    """
    if cols.shape[1] <= 1024:
        diff = cols[None, :, :] - chrom[:, :, None]
        d2 = (diff * diff).sum(axis=1)
    else:
        # per-channel loop avoids a (k, 3, n) temporary on large images
        d2 = np.empty((chrom.shape[0], cols.shape[1]))
        for j, center in enumerate(chrom):
            acc = d2[j]
            acc[:] = 0.0
            for channel, value in zip(cols, center):
                t = channel - value
                acc += t * t
    labels = d2.argmin(axis=0)
    return labels, np.sqrt(d2[labels, np.arange(d2.shape[1])])


def _assign(cols: np.ndarray, chrom: np.ndarray) -> ClusterAssignment:
    k = chrom.shape[0]
    labels, dist = _nearest(cols, chrom)
    if cols.shape[1] <= 1024:
        member = (labels == np.arange(k)[:, None]).astype(np.float64)
        counts = member.sum(axis=1).astype(np.intp)
        sums = member @ cols.T
    else:
        counts = np.bincount(labels, minlength=k)
        sums = np.stack([np.bincount(labels, weights=channel, minlength=k) for channel in cols], axis=1)
    centroids = chrom.copy()
    nz = counts > 0
    centroids[nz] = sums[nz] / counts[nz, None]
    return ClusterAssignment(labels, counts, centroids, dist)


def _fitness(cols: np.ndarray, chrom: np.ndarray) -> float:
    return float(np.sum(_nearest(cols, chrom)[1]))


def assign_pixels(pixels: np.ndarray, chrom: Chromosome) -> ClusterAssignment:
    """Label each pixel with its nearest center; ties go to the lower index."""
    return _assign(_columns(_check_pixels(pixels)), np.asarray(chrom, dtype=np.float64))


def update_centers(assignment: ClusterAssignment, chrom: Chromosome) -> Chromosome:
    """Move every non-empty cluster's center to its member mean."""
    new = np.array(chrom, dtype=np.float64, copy=True)
    nz = assignment.counts > 0
    new[nz] = assignment.centroids[nz]
    return new


def fitness(pixels: np.ndarray, chrom: Chromosome) -> float:
    """Total Euclidean distance of pixels to their nearest center."""
    return _fitness(_columns(_check_pixels(pixels)), np.asarray(chrom, dtype=np.float64))


def init_population(pixels: np.ndarray, cfg: GaConfig, rng: np.random.Generator) -> list[Chromosome]:
    """Random chromosomes whose centers are distinct pixel colors.

    Falls back to sampling with replacement when the image has fewer than
    ``k`` distinct colors.
    """
    pixels = _check_pixels(pixels)
    colors = np.unique(pixels, axis=0)
    replace = len(colors) < cfg.k
    return [
        colors[rng.choice(len(colors), size=cfg.k, replace=replace)].copy()
        for _ in range(cfg.population_size)
    ]


def _tournament(fit: np.ndarray, rng: np.random.Generator) -> int:
    a, b = rng.integers(0, len(fit), size=2)
    if fit[b] < fit[a] or (fit[b] == fit[a] and b < a):
        return int(b)
    return int(a)


def _refine(cols: np.ndarray, chrom: Chromosome) -> tuple[Chromosome, float]:
    if cols.shape[1] > 1024:
        chrom = update_centers(_assign(cols, chrom), chrom)
        return chrom, _fitness(cols, chrom)
    # same arithmetic as assign -> update -> fitness, minus the bookkeeping;
    # this path dominates GA time on small pixel sets
    diff = cols[None, :, :] - chrom[:, :, None]
    labels = (diff * diff).sum(axis=1).argmin(axis=0)
    member = labels == np.arange(len(chrom))[:, None]
    counts = member.sum(axis=1)
    nz = counts > 0
    new = chrom.copy()
    new[nz] = (member[nz] @ cols.T) / counts[nz, None]
    diff = cols[None, :, :] - new[:, :, None]
    return new, float(np.sqrt((diff * diff).sum(axis=1).min(axis=0)).sum())


def _evolve(
    population: list[Chromosome],
    fit: np.ndarray,
    cols: np.ndarray,
    cfg: GaConfig,
    rng: np.random.Generator,
) -> tuple[list[Chromosome], np.ndarray]:
    size = len(population)
    k = population[0].shape[0]
    order = np.argsort(fit, kind="stable")
    next_pop = [population[i].copy() for i in order[: cfg.elitism]]
    next_fit = [fit[i] for i in order[: cfg.elitism]]

    while len(next_pop) < size:
        a = population[_tournament(fit, rng)]
        b = population[_tournament(fit, rng)]
        if k > 1 and rng.random() < cfg.crossover_rate:
            cut = int(rng.integers(1, k))
            children = [np.vstack([a[:cut], b[cut:]]), np.vstack([b[:cut], a[cut:]])]
        else:
            children = [a.copy(), b.copy()]
        for child in children:
            if len(next_pop) >= size:
                break
            hit = rng.random(child.shape) < cfg.mutation_rate
            noise = rng.normal(0.0, cfg.mutation_sigma, child.shape)
            child = np.clip(child + np.where(hit, noise, 0.0), 0.0, 255.0)
            child, f = _refine(cols, child)
            next_pop.append(child)
            next_fit.append(f)
    return next_pop, np.asarray(next_fit)


def evolve_generation(
    population: list[Chromosome],
    pixels: np.ndarray,
    cfg: GaConfig,
    rng: np.random.Generator,
) -> list[Chromosome]:
    """Produce the next generation.

    Elites are copied unchanged; the rest are bred by binary tournament,
    single-point crossover at a center boundary, per-coordinate Gaussian
    mutation and one assign/update refinement step.
    """
    cols = _columns(_check_pixels(pixels))
    fit = np.array([_fitness(cols, c) for c in population])
    return _evolve(population, fit, cols, cfg, rng)[0]


def cluster_pixels(pixels: np.ndarray, cfg: GaConfig) -> GaResult:
    """Run the GA on a raw ``(n, 3)`` pixel array."""
    pixels = _check_pixels(pixels)
    rng = np.random.default_rng(cfg.seed)
    work = pixels
    if cfg.max_pixels is not None and len(pixels) > cfg.max_pixels:
        pick = np.sort(rng.choice(len(pixels), size=cfg.max_pixels, replace=False))
        work = pixels[pick]

    population = init_population(work, cfg, rng)
    cols = _columns(work)
    fit = np.array([_fitness(cols, c) for c in population])
    best_i = int(np.argmin(fit))
    best, best_fit = population[best_i].copy(), float(fit[best_i])
    history = [best_fit]

    generations_run = 0
    for _ in range(cfg.generations):
        population, fit = _evolve(population, fit, cols, cfg, rng)
        generations_run += 1
        i = int(np.argmin(fit))
        if fit[i] < best_fit:
            best, best_fit = population[i].copy(), float(fit[i])
        history.append(best_fit)
        window = cfg.stagnation_window
        if len(history) > window and history[-window - 1] - history[-1] < 1e-6:
            break

    assignment = assign_pixels(pixels, best)
    return GaResult(best, assignment, float(np.sum(assignment.distances)), generations_run, history)


def run_ga(img: RasterImage, cfg: GaConfig) -> GaResult:
    """Cluster the pixels of a YCbCr image into ``cfg.k`` color groups."""
    return cluster_pixels(image_pixels(img), cfg)


def extract_cluster_mask(assignment: ClusterAssignment, cluster: int, w: int, h: int) -> RasterImage:
    if not 0 <= cluster < assignment.k:
        raise LeafDxError(f"cluster index {cluster} out of range for k={assignment.k}")
    if len(assignment.labels) != w * h:
        raise LeafDxError("assignment size does not match mask dimensions")
    mask = np.where(assignment.labels.reshape(h, w) == cluster, 255.0, 0.0)
    return RasterImage(mask, GRAY)


def border_shares(assignment: ClusterAssignment, w: int, h: int) -> np.ndarray:
    """Fraction of the image-border pixels owned by each cluster."""
    grid = assignment.labels.reshape(h, w)
    edge = np.ones((h, w), dtype=bool)
    edge[1:-1, 1:-1] = False
    counts = np.bincount(grid[edge], minlength=assignment.k)
    return counts / counts.sum()


def select_diseased_cluster(
    assignment: ClusterAssignment,
    img: RasterImage,
    border_fraction_threshold: float = 0.25,
    override: int | None = None,
) -> int:
    """Pick the lesion cluster.

    Clusters holding more than ``border_fraction_threshold`` of the border
    are treated as background. Of the rest, the one with the highest mean Cr
    wins: necrotic brown tissue is redder than healthy green tissue.
    """
    if override is not None:
        if not 0 <= override < assignment.k:
            raise LeafDxError(f"cluster override {override} out of range for k={assignment.k}")
        return override
    if assignment.k < 2:
        raise LeafDxError("diseased-cluster selection needs k >= 2")
    shares = border_shares(assignment, img.width, img.height)
    keep = (shares <= border_fraction_threshold) & (assignment.counts > 0)
    if not keep.any():
        raise NoForegroundError("no foreground found: every cluster touches the border")
    cr = np.where(keep, assignment.centroids[:, CR_AXIS], -np.inf)
    return int(np.argmax(cr))
