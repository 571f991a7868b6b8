import numpy as np
import pytest
from scipy.signal import correlate2d

from lsr.config import ConfigurationError
from lsr.representations import (
    HAAR,
    HAAR_POSITIONS,
    LAWS_KERNELS,
    LAWS_NORMS,
    LAWS_POSITIONS,
    RING_POSITIONS,
    TYPE_WIDTHS,
    RepresentationPool,
    RepresentationSpec,
    TransformFitError,
    apply_central_saab,
    apply_ringwise_saab,
    apply_type4,
    apply_type5,
    build_pool,
    fit_channel_pca,
    fit_saab,
    gather_windows,
    haar_responses,
    laws_responses,
    project,
)
from lsr.imaging import YImage
from lsr.patches import extract_patches, sample_positions


@pytest.fixture(scope="module")
def patches():
    rng = np.random.default_rng(7)
    base = rng.uniform(0, 255, (300, 15, 15))
    rows = np.arange(15)[None, :, None]
    return base * 0.3 + 8.0 * rows


def test_type_widths():
    assert TYPE_WIDTHS == {1: 225, 2: 74, 3: 297, 4: 392, 5: 450}
    assert sum(TYPE_WIDTHS.values()) == 1438
    assert len(RING_POSITIONS) == 33
    assert len(HAAR_POSITIONS) == 49
    assert len(LAWS_POSITIONS) == 25


def test_filterbanks_are_zero_sum_except_dc():
    np.testing.assert_allclose(HAAR[1:].sum(axis=1), 0.0)
    assert np.all(LAWS_KERNELS[1:].sum(axis=1) == 0.0)
    np.testing.assert_allclose(HAAR @ HAAR.T, np.eye(4))
    np.testing.assert_allclose(LAWS_NORMS[0], 6.0)


def test_zero_sum_filters_vanish_on_constant_patch():
    flat = np.full((1, 15, 15), 93.0)
    assert np.all(haar_responses(flat)[..., 1:] == 0.0)
    assert np.all(laws_responses(flat)[..., 1:] == 0.0)


@pytest.mark.parametrize("n", [3, 5, 7])
def test_saab_kernels_are_orthonormal(patches, n):
    windows = gather_windows(patches, n, [(4, 4)])[:, 0]
    kernels = fit_saab(windows, n)
    assert kernels.kernels.shape == (n * n, n * n)
    np.testing.assert_allclose(kernels.kernels[0], 1.0 / n)
    gram = kernels.kernels @ kernels.kernels.T
    assert np.abs(gram - np.eye(n * n)).max() < 1e-6


def test_saab_conserves_energy(patches):
    windows = gather_windows(patches, 3, RING_POSITIONS).reshape(-1, 9)
    kernels = fit_saab(windows, 3)
    coeffs = kernels.transform(windows)
    energy_in = (windows**2).sum(axis=1)
    energy_out = (coeffs**2).sum(axis=1)
    assert np.max(np.abs(energy_out - energy_in) / energy_in) < 1e-6


def test_saab_eigenvalues_descend(patches):
    kernels = fit_saab(gather_windows(patches, 5, [(5, 5)])[:, 0], 5)
    assert np.all(np.diff(kernels.eigenvalues) <= 1e-9)


def test_saab_on_constant_windows_is_rank_deficient():
    kernels = fit_saab(np.full((50, 9), 4.0), 3)
    assert kernels.rank_deficient
    gram = kernels.kernels @ kernels.kernels.T
    assert np.abs(gram - np.eye(9)).max() < 1e-6


def test_saab_without_windows():
    with pytest.raises(TransformFitError):
        fit_saab(np.zeros((0, 9)), 3)


def test_channel_pca_is_orthonormal(patches):
    pca = fit_channel_pca(laws_responses(patches).reshape(-1, 9), 9)
    np.testing.assert_allclose(pca.matrix @ pca.matrix.T, np.eye(9), atol=1e-10)
    assert not pca.rank_deficient


def test_spec_layout_and_offsets():
    spec = RepresentationSpec((5, 1, 3))
    assert spec.enabled_types == (1, 3, 5)
    assert spec.width == 225 + 297 + 450
    assert spec.offsets() == {1: 0, 3: 225, 5: 522}
    layout = spec.feature_layout()
    assert layout[0] == (1, 0)
    assert layout[225] == (3, 0)
    assert len(layout) == spec.width


def test_spec_rejects_unknown_type():
    with pytest.raises(ConfigurationError):
        RepresentationSpec((0, 6))


def test_full_pool_width(patches):
    pool = RepresentationPool.fit(patches, (1, 2, 3, 4, 5))
    matrix = pool.build(patches[:10])
    assert matrix.shape == (10, 1438)
    np.testing.assert_array_equal(matrix[:, :225], patches[:10].reshape(10, -1))


def test_single_patch_matches_batch(patches):
    pool = RepresentationPool.fit(patches, (2, 4))
    batch = pool.build(patches[:3])
    np.testing.assert_allclose(pool.build(patches[1]), batch[1])
    np.testing.assert_allclose(build_pool(patches[2], pool.spec, pool), batch[2])


def test_build_select_and_chunked(patches):
    pool = RepresentationPool.fit(patches, (1, 3, 5))
    select = np.array([700, 3, 250])
    full = pool.build(patches[:40])
    chunked = pool.build_chunked(patches[:40], select, chunk_size=7)
    np.testing.assert_allclose(chunked, full[:, select])


def test_ringwise_coefficient_order(patches):
    pool = RepresentationPool.fit(patches, (3,))
    coeffs = apply_ringwise_saab(patches[0], pool.saab3)
    first = pool.saab3.transform(patches[0, 5:8, 5:8].ravel())
    np.testing.assert_allclose(coeffs[:9], first)


def test_unfitted_transform_is_reported(patches):
    pool = RepresentationPool(RepresentationSpec((2,)))
    with pytest.raises(ConfigurationError):
        pool.build(patches[:2])


def test_max_windows_caps_fitting(patches):
    pool = RepresentationPool.fit(patches, (3, 5), max_windows=500, rng=np.random.default_rng(1))
    assert pool.fit_counts == {"saab3": 500, "pca9": 500}


def test_project_is_a_matrix_product(patches):
    matrix = np.random.default_rng(2).normal(size=(6, 9))
    rows = patches[:20, :3, :3].reshape(20, 9)
    np.testing.assert_allclose(project(rows, matrix), rows @ matrix.T, rtol=1e-12)


@pytest.fixture(scope="module")
def full_pool(patches):
    return RepresentationPool.fit(patches, (1, 2, 3, 4, 5))


@pytest.mark.parametrize("shape", [(15, 15), (23, 31), (40, 18)])
def test_image_maps_equal_per_patch_pools(full_pool, shape):
    rng = np.random.default_rng(shape[0])
    data = rng.uniform(0, 255, shape)
    positions = sample_positions(*shape, 1)
    per_patch = full_pool.build(extract_patches(YImage(data), positions))
    np.testing.assert_array_equal(full_pool.build_image(data, positions), per_patch)


def test_image_maps_with_selected_columns(full_pool):
    data = np.random.default_rng(4).uniform(0, 255, (20, 26))
    positions = np.array([[0, 25], [19, 0], [10, 13], [10, 13]])
    select = np.array([1437, 230, 0, 600, 300])
    per_patch = full_pool.build(extract_patches(YImage(data), positions), select)
    np.testing.assert_array_equal(full_pool.build_image(data, positions, select), per_patch)


def test_image_maps_skip_unselected_types(full_pool):
    padded = np.zeros((20, 20))
    maps = full_pool.image_maps(padded, full_pool.spec.types_for(np.array([5, 230])))
    assert maps.types == (1, 2)
    assert set(maps.maps) == {"saab5", "saab7"}
    with pytest.raises(ConfigurationError):
        maps.gather(np.array([[0, 0]]), np.array([700]))


def filter_then_project(patch, kernels, size, corners, pca):
    rows = []
    for kernel in kernels:
        response = correlate2d(patch, kernel.reshape(size, size), mode="valid")
        rows.append([response[r, c] for r, c in corners])
    raw = np.array(rows).T
    coeffs = (raw - pca.mean) @ pca.matrix.T
    return np.concatenate([raw, coeffs], axis=1).ravel()


def test_type4_is_haar_filtering_then_pca(patches, full_pool):
    expected = filter_then_project(patches[3], HAAR, 2, HAAR_POSITIONS, full_pool.pca4)
    np.testing.assert_allclose(apply_type4(patches[3], full_pool.pca4), expected, atol=1e-9)


def test_type5_is_laws_filtering_then_pca(patches, full_pool):
    kernels = LAWS_KERNELS / LAWS_NORMS[:, None]
    expected = filter_then_project(patches[4], kernels, 3, LAWS_POSITIONS, full_pool.pca9)
    np.testing.assert_allclose(apply_type5(patches[4], full_pool.pca9), expected, atol=1e-9)


def test_central_saab_of_constant_patch(full_pool):
    value = 37.0
    coeffs = apply_central_saab(np.full((15, 15), value), full_pool.saab5, full_pool.saab7)
    assert coeffs[0] == pytest.approx(5 * value)
    assert coeffs[25] == pytest.approx(7 * value)
    np.testing.assert_allclose(coeffs[1:25], 0.0, atol=1e-9)
    np.testing.assert_allclose(coeffs[26:], 0.0, atol=1e-9)


def test_two_by_two_saab_recovers_known_components():
    u1 = np.array([1.0, 1.0, -1.0, -1.0]) / 2
    u2 = np.array([1.0, -1.0, 1.0, -1.0]) / 2
    u3 = np.array([1.0, -1.0, -1.0, 1.0]) / 2
    windows = np.stack([3 * u1, -3 * u1, 2 * u2, -2 * u2, u3, -u3])
    kernels = fit_saab(windows, 2)
    np.testing.assert_allclose(kernels.kernels[0], 0.5)
    for row, expected in zip(kernels.kernels[1:], (u1, u2, u3)):
        assert abs(row @ expected) == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(kernels.eigenvalues, [3.0, 4.0 / 3.0, 1.0 / 3.0], atol=1e-9)


def test_channel_pca_of_known_covariance():
    mean = np.array([10.0, -5.0])
    v1, v2 = np.array([0.6, 0.8]), np.array([-0.8, 0.6])
    responses = np.stack([mean + 2 * v1, mean - 2 * v1, mean + v2, mean - v2])
    pca = fit_channel_pca(responses, 2)
    np.testing.assert_allclose(pca.mean, mean)
    np.testing.assert_allclose(pca.eigenvalues, [2.0, 0.5], atol=1e-12)
    np.testing.assert_allclose(pca.matrix, [[0.6, 0.8], [0.8, -0.6]], atol=1e-12)
