import numpy as np
import pytest

from lsr.imaging import DimensionError, ImagePair, YImage
from lsr.patches import (
    Dataset,
    Hardness,
    augment,
    build_dataset,
    classify_hardness,
    dihedral,
    dihedral_layout,
    extract_patches,
    extract_samples,
    pad_image,
    patch_variance,
    sample_positions,
)


def test_variance_threshold_boundary_is_hard():
    assert classify_hardness(180.0) is Hardness.HARD
    assert classify_hardness(179.999) is Hardness.EASY


def test_constant_patch_has_zero_variance():
    assert patch_variance(np.full((15, 15), 42.0)) == 0.0


def test_patch_variance_matches_population_variance():
    rng = np.random.default_rng(3)
    patch = rng.uniform(0, 255, (15, 15))
    assert patch_variance(patch) == pytest.approx(np.var(patch))


def test_patch_variance_rejects_wrong_size():
    with pytest.raises(DimensionError):
        patch_variance(np.zeros((14, 15)))


def test_dihedral_modes():
    patch = np.arange(9).reshape(3, 3)
    np.testing.assert_array_equal(dihedral(patch, 0), patch)
    np.testing.assert_array_equal(dihedral(patch, 1), np.rot90(patch))
    np.testing.assert_array_equal(dihedral(patch, 4), np.fliplr(patch))
    images = {dihedral(patch, m).tobytes() for m in range(8)}
    assert len(images) == 8


def test_dihedral_preserves_variance_and_center():
    rng = np.random.default_rng(5)
    patch = rng.uniform(0, 255, (15, 15))
    for mode in range(8):
        moved = dihedral(patch, mode)
        assert moved[7, 7] == patch[7, 7]
        assert patch_variance(moved) == patch_variance(patch)


def test_dihedral_rejects_bad_input():
    with pytest.raises(DimensionError):
        dihedral(np.zeros((3, 4)), 0)
    with pytest.raises(ValueError):
        dihedral(np.zeros((3, 3)), 8)


def test_sample_positions_row_major():
    positions = sample_positions(5, 4, 2)
    assert positions.tolist() == [[0, 0], [0, 2], [2, 0], [2, 2], [4, 0], [4, 2]]


def test_border_patches_replicate_edges():
    data = np.arange(100, dtype=float).reshape(10, 10)
    patch = extract_patches(YImage(data), np.array([[0, 0]]))[0]
    assert patch.shape == (15, 15)
    assert patch[7, 7] == data[0, 0]
    assert np.all(patch[:8, :8] == data[0, 0])
    np.testing.assert_array_equal(patch[7, 7:], np.concatenate([data[0, :8]]))


def test_residual_decomposition(image):
    pair = ImagePair.from_hr(image)
    dataset = extract_samples(pair, stride=1)
    assert len(dataset) == image.height * image.width
    rows, cols = dataset.positions[:, 0], dataset.positions[:, 1]
    np.testing.assert_allclose(
        pair.ilr.data[rows, cols] + dataset.residuals, pair.hr.data[rows, cols], atol=1e-12
    )


def test_inference_samples_have_no_residual(image):
    dataset = extract_samples(ImagePair.from_hr(image), stride=4, for_training=False)
    assert np.isnan(dataset.residuals).all()
    assert dataset[0].residual is None


def test_textured_image_has_both_classes(image):
    dataset = extract_samples(ImagePair.from_hr(image), stride=2)
    easy, hard = dataset.split()
    assert len(easy) > 0 and len(hard) > 0
    assert len(easy) + len(hard) == len(dataset)
    assert np.all(hard.variances >= 180.0)


def test_patches16_shape(image):
    dataset = extract_samples(ImagePair.from_hr(image), stride=8)
    assert dataset.patches16.shape == (len(dataset), 16, 16)
    assert dataset[0].patch16.shape == (16, 16)


def test_augment_multiplies_by_eight(image):
    dataset = extract_samples(ImagePair.from_hr(image), stride=6)
    augmented = augment(dataset)
    assert len(augmented) == 8 * len(dataset)
    np.testing.assert_array_equal(augmented.residuals[: len(dataset)], dataset.residuals)
    np.testing.assert_allclose(augmented.variances, np.tile(dataset.variances, 8))
    assert augment(augmented) is augmented


def test_concat_reindexes_sources(image):
    a = build_dataset(image, sample_positions(48, 48, 16), source="a.png")
    b = build_dataset(image, sample_positions(48, 48, 24), source="b.png")
    both = Dataset.concat([a, b, Dataset.empty()])
    assert both.sources == ["a.png", "b.png"]
    assert len(both) == len(a) + len(b)
    assert set(both.origins[len(a) :]) == {1}


def test_subsample_is_seeded(image):
    dataset = extract_samples(ImagePair.from_hr(image), stride=1)
    first = dataset.subsample(50, np.random.default_rng(9))
    second = dataset.subsample(50, np.random.default_rng(9))
    assert len(first) == 50
    np.testing.assert_array_equal(first.positions, second.positions)


@pytest.mark.parametrize("mode", range(8))
def test_dihedral_layout_places_transformed_patches(image, mode):
    ilr = YImage(image.data[:30, :41])
    positions = np.array([[0, 0], [3, 17], [29, 40], [12, 0]])
    transformed, corners = dihedral_layout(pad_image(ilr), positions, mode)
    expected = dihedral(extract_patches(ilr, positions), mode)
    for corner, patch in zip(corners, expected):
        r, c = corner
        np.testing.assert_array_equal(transformed[r : r + 15, c : c + 15], patch)


def test_build_dataset_without_positions(image):
    dataset = build_dataset(image, np.zeros((0, 2), dtype=np.int64), np.zeros(0))
    assert len(dataset) == 0
    assert dataset.variances.shape == (0,)
    assert dataset.patches16.shape == (0, 16, 16)
