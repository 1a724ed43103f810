import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from leafdx.errors import ConfigError, EmptyGlcmError, LeafDxError
from leafdx.imaging import GRAY, RGB, RasterImage
from leafdx.texture import (
    FEATURE_NAMES,
    GlcmConfig,
    compute_glcm,
    extract_features,
    glcm_features,
    quantize,
    texture_report,
)

OFFSETS = [(0, 1), (-1, 1), (-1, 0), (-1, -1), (0, 2), (2, -1)]


def naive_glcm(q, mask, offset, n):
    """Double-loop pair counter, symmetrized and normalized."""
    h, w = len(q), len(q[0])
    dy, dx = offset
    counts = [[0] * n for _ in range(n)]
    for r in range(h):
        for c in range(w):
            r2, c2 = r + dy, c + dx
            if not (0 <= r2 < h and 0 <= c2 < w):
                continue
            if mask is not None and not (mask[r][c] and mask[r2][c2]):
                continue
            counts[q[r][c]][q[r2][c2]] += 1
            counts[q[r2][c2]][q[r][c]] += 1
    total = sum(map(sum, counts))
    return [[v / total for v in row] for row in counts] if total else None


grids = arrays(np.intp, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.integers(0, 3))


# ---------------------------------------------------------------- config / quantize

def test_config_validation():
    for kwargs in ({"levels": 1}, {"levels": 257}, {"distance": 0}, {"directions": ()}, {"directions": (30,)}):
        with pytest.raises(ConfigError):
            GlcmConfig(**kwargs)


def test_config_offsets():
    assert GlcmConfig(distance=2).offsets() == [(0, 2), (-2, 2), (-2, 0), (-2, -2)]


def test_quantize_examples():
    assert quantize(np.array([[0.0, 255.0, 128.0]]), 8).tolist() == [[0, 7, 4]]
    assert quantize(np.array([[31.9, 32.0]]), 8).tolist() == [[0, 1]]
    with pytest.raises(ConfigError):
        quantize(np.zeros((2, 2)), 1)


@given(arrays(np.float64, (3, 4), elements=st.floats(0, 255)), st.integers(2, 256))
def test_quantize_range(values, levels):
    q = quantize(values, levels)
    assert q.min() >= 0 and q.max() < levels


# ---------------------------------------------------------------- GLCM

def test_glcm_hand_example():
    g = compute_glcm(np.array([[0, 0], [1, 1]]), None, (0, 1), GlcmConfig(levels=2))
    assert g.tolist() == [[0.5, 0.0], [0.0, 0.5]]


def test_glcm_constant_grid():
    for offset in OFFSETS:
        g = compute_glcm(np.full((5, 5), 3), None, offset, GlcmConfig(levels=8))
        assert g[3, 3] == 1.0 and g.sum() == 1.0


def test_glcm_errors():
    cfg = GlcmConfig(levels=4)
    with pytest.raises(ConfigError):
        compute_glcm(np.zeros((3, 3), int), None, (0, 0), cfg)
    with pytest.raises(EmptyGlcmError):
        compute_glcm(np.zeros((3, 3), int), None, (0, 3), cfg)
    mask = np.zeros((3, 3), bool)
    mask[1, 1] = True
    with pytest.raises(EmptyGlcmError):
        compute_glcm(np.zeros((3, 3), int), mask, (0, 1), cfg)
    with pytest.raises(LeafDxError):
        compute_glcm(np.full((2, 2), 4), None, (0, 1), cfg)


def test_glcm_matches_naive_oracle_on_random_grids():
    rng = np.random.default_rng(2024)
    cfg = GlcmConfig(levels=4)
    for _ in range(200):
        q = rng.integers(0, 4, (4, 4))
        mask = rng.random((4, 4)) < 0.7
        for offset in OFFSETS[:4]:
            for m in (None, mask):
                expected = naive_glcm(q.tolist(), None if m is None else m.tolist(), offset, 4)
                if expected is None:
                    with pytest.raises(EmptyGlcmError):
                        compute_glcm(q, m, offset, cfg)
                else:
                    assert compute_glcm(q, m, offset, cfg).tolist() == expected


@settings(max_examples=150)
@given(grids, st.sampled_from(OFFSETS))
def test_glcm_symmetric_normalized(q, offset):
    try:
        g = compute_glcm(q, None, offset, GlcmConfig(levels=4))
    except EmptyGlcmError:
        return
    assert np.all(g >= 0)
    assert abs(g.sum() - 1.0) <= 1e-12
    assert np.array_equal(g, g.T)


def test_unmasked_flag_ignores_mask():
    q = np.random.default_rng(1).integers(0, 4, (5, 5))
    mask = np.zeros((5, 5), bool)
    mask[:2, :2] = True
    off = GlcmConfig(levels=4, masked=False)
    assert np.array_equal(compute_glcm(q, mask, (0, 1), off), compute_glcm(q, None, (0, 1), off))


# ---------------------------------------------------------------- features

def test_features_constant():
    g = np.zeros((8, 8))
    g[5, 5] = 1.0
    f = glcm_features(g)
    assert (f.contrast, f.energy, f.dissimilarity, f.entropy, f.correlation) == (0.0, 1.0, 0.0, 0.0, 1.0)
    assert f.sigma2 == 0.0 and f.mu == 5.0


def test_features_two_diagonal_entries():
    f = glcm_features(np.array([[0.5, 0.0], [0.0, 0.5]]))
    assert f.contrast == 0.0 and f.dissimilarity == 0.0
    assert f.energy == pytest.approx(0.5, abs=1e-12)
    assert f.entropy == pytest.approx(math.log(2), abs=1e-9)
    assert f.mu == pytest.approx(0.5) and f.sigma2 == pytest.approx(0.25)
    assert f.correlation == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("n", [2, 4, 8])
def test_features_uniform(n):
    f = glcm_features(np.full((n, n), 1.0 / n**2))
    assert f.energy == pytest.approx(1.0 / n**2, abs=1e-12)
    assert abs(f.correlation) <= 1e-9
    assert f.entropy == pytest.approx(2 * math.log(n), abs=1e-9)


def test_features_anti_diagonal():
    # perfectly anti-correlated neighbours
    f = glcm_features(np.array([[0.0, 0.5], [0.5, 0.0]]))
    assert f.correlation == pytest.approx(-1.0)
    assert f.contrast == 1.0 and f.dissimilarity == 1.0


@settings(max_examples=150)
@given(grids, st.sampled_from(OFFSETS))
def test_feature_bounds(q, offset):
    try:
        g = compute_glcm(q, None, offset, GlcmConfig(levels=4))
    except EmptyGlcmError:
        return
    f = glcm_features(g)
    single = np.count_nonzero(g) == 1
    assert 1 / 16 - 1e-12 <= f.energy <= 1.0 + 1e-12
    assert (f.energy == pytest.approx(1.0)) == single
    assert f.contrast >= 0 and f.dissimilarity >= 0 and f.entropy >= -1e-15 and f.sigma2 >= 0
    assert (abs(f.entropy) <= 1e-12) == single
    if f.sigma2 >= 1e-12:
        assert -1 - 1e-9 <= f.correlation <= 1 + 1e-9


@settings(max_examples=100)
@given(arrays(np.intp, (4, 5), elements=st.integers(0, 1)).map(lambda a: a + np.arange(5) // 3))
def test_contrast_equals_dissimilarity_for_unit_steps(q):
    # horizontal neighbours here differ by at most one level
    g = compute_glcm(q, None, (0, 1), GlcmConfig(levels=4))
    if np.all(np.abs(np.subtract.outer(np.arange(4), np.arange(4)))[g > 0] <= 1):
        f = glcm_features(g)
        assert f.contrast == pytest.approx(f.dissimilarity, abs=1e-12)


# ---------------------------------------------------------------- extraction

def _gray(values):
    return RasterImage(np.asarray(values, dtype=float)[:, :, None], GRAY)


def test_constant_region_vector():
    img = RasterImage(np.full((10, 10, 3), 90.0), RGB)
    mask = np.zeros((10, 10), bool)
    mask[3:7, 3:7] = True
    assert extract_features(img, mask).tolist() == [0.0, 1.0, 0.0, 0.0, 1.0]


def test_vector_shape_and_names():
    img = RasterImage(np.random.default_rng(3).uniform(0, 255, (12, 12, 3)), RGB)
    rep = texture_report(img, None)
    assert len(rep["vector"]) == 5 and tuple(rep["features"]) == FEATURE_NAMES
    assert set(rep["per_direction"]) == {"0", "45", "90", "135"}
    assert rep["mask_pixels"] == 144


def test_full_mask_equals_unmasked():
    img = _gray(np.random.default_rng(4).uniform(0, 255, (9, 9)))
    full = np.full((9, 9), 255.0)
    a = extract_features(img, full)
    b = extract_features(img, None, GlcmConfig(masked=False))
    assert np.array_equal(a, b)


def test_vector_is_direction_mean():
    img = _gray(np.random.default_rng(5).uniform(0, 255, (8, 8)))
    rep = texture_report(img, None)
    q = quantize(img, 8)
    per = [glcm_features(compute_glcm(q, None, o)).vector() for o in GlcmConfig().offsets()]
    assert np.allclose(rep["vector"], np.mean(per, axis=0), rtol=0, atol=1e-15)


def test_masked_features_ignore_outside_pixels():
    rng = np.random.default_rng(6)
    base = rng.uniform(0, 255, (10, 10))
    other = base.copy()
    other[:, 6:] = rng.uniform(0, 255, (10, 4))
    mask = np.zeros((10, 10), bool)
    mask[:, :5] = True
    # pairs need both ends inside, so columns >= 6 never count
    assert np.array_equal(extract_features(_gray(base), mask), extract_features(_gray(other), mask))


def test_mask_image_threshold():
    img = _gray(np.random.default_rng(7).uniform(0, 255, (6, 6)))
    m = np.zeros((6, 6))
    m[1:5, 1:5] = 255.0
    as_image = RasterImage(m[:, :, None], GRAY)
    assert np.array_equal(extract_features(img, as_image), extract_features(img, m > 127))


def test_extraction_errors():
    img = _gray(np.zeros((5, 5)))
    with pytest.raises(LeafDxError, match="empty mask"):
        extract_features(img, np.zeros((5, 5), bool))
    single = np.zeros((5, 5), bool)
    single[2, 2] = True
    with pytest.raises(EmptyGlcmError, match="every direction"):
        extract_features(img, single)
    with pytest.raises(LeafDxError):
        extract_features(img, np.ones((4, 4), bool))


def test_thin_mask_skips_empty_directions():
    img = _gray(np.random.default_rng(8).uniform(0, 255, (6, 6)))
    row = np.zeros((6, 6), bool)
    row[2, :] = True
    rep = texture_report(img, row)
    assert list(rep["per_direction"]) == ["0"]
