from dataclasses import replace

import numpy as np
import pytest

from conftest import small_config, textured_image
from lsr.decision.pipeline import (
    LsrTrainer,
    TrainingError,
    dataset_statistics,
    predict_residual,
    predict_residual_map,
    predict_residuals,
    superresolve,
    superresolve_color,
    train_lsr,
)
from lsr.imaging import ImagePair, YImage, lanczos_upscale, psnr
from lsr.patches import Dataset, Hardness, build_dataset, extract_samples, sample_positions
from lsr.utils.parallel import ThreadBudget


def symmetric_patches():
    i15 = np.arange(15) - 7
    p15 = (i15[:, None] ** 2 + i15[None, :] ** 2).astype(np.float64) * 3.0
    fold = np.minimum(np.arange(16), 15 - np.arange(16))
    p16 = (fold[:, None] ** 2 + fold[None, :] ** 2).astype(np.float64) * 3.0
    return p15[None], p16[None]


def test_trained_model_layout(trained_model):
    easy, hard = trained_model.easy, trained_model.hard
    assert easy is not None and hard is not None
    assert easy.types == (1, 3)
    assert hard.types == (1, 2, 3, 4, 5)
    assert easy.feature_count == 20
    assert hard.feature_count == 30
    assert easy.kmeans is None and easy.clusters == 1
    assert hard.clusters == 2 and len(hard.regressors) == 2
    assert hard.fusion_factor == 2 and easy.fusion_factor == 1
    assert all(reg.n_trees == 3 for reg in easy.regressors + hard.regressors)
    assert len(hard.rft_curve) == hard.pool.spec.width
    assert np.all(np.diff(hard.rft_curve) >= 0)
    np.testing.assert_array_equal(hard.selected_ids, hard.rft_curve_ids[:30])


def test_superresolve_doubles_size(trained_model):
    lr = YImage(textured_image(20, 26, seed=5).data)
    out = superresolve(trained_model, lr)
    assert out.shape == (40, 52)
    assert out.data.min() >= 0.0 and out.data.max() <= 255.0


def test_output_is_ilr_plus_residual(trained_model):
    lr = YImage(textured_image(16, 16, seed=6).data)
    ilr = lanczos_upscale(lr, 2)
    raw = superresolve(trained_model, lr, clamp=False)
    np.testing.assert_allclose(raw.data, ilr.data + predict_residual_map(trained_model, ilr))


def test_superresolve_is_repeatable(trained_model):
    lr = YImage(textured_image(16, 20, seed=7).data)
    first = superresolve(trained_model, lr)
    second = superresolve(trained_model, lr)
    np.testing.assert_array_equal(first.data, second.data)


def test_thread_count_does_not_change_output(trained_model):
    ilr = lanczos_upscale(YImage(textured_image(24, 24, seed=8).data), 2)
    single = predict_residual_map(trained_model, ilr)
    ThreadBudget().configure(3)
    np.testing.assert_array_equal(predict_residual_map(trained_model, ilr), single)


@pytest.mark.parametrize("factor", [1, 2, 4])
def test_residual_map_matches_per_patch_prediction(trained_model, factor):
    model = trained_model.with_fusion_factor(factor)
    ilr = lanczos_upscale(YImage(textured_image(14, 19, seed=11).data), 2)
    positions = sample_positions(ilr.height, ilr.width, 1)
    dataset = build_dataset(ilr, positions, threshold=model.config.variance_threshold)
    assert dataset.hard.any() and not dataset.hard.all()
    expected = predict_residuals(model, dataset).reshape(ilr.height, ilr.width)
    np.testing.assert_allclose(predict_residual_map(model, ilr), expected, rtol=0, atol=1e-9)


def test_single_sample_matches_batch(trained_model):
    dataset = extract_samples(ImagePair.from_hr(textured_image(seed=9)), stride=7)
    for index in (0, len(dataset) // 2, len(dataset) - 1):
        part = dataset.subset(np.array([index]))
        assert predict_residual(trained_model, dataset[index]) == predict_residuals(
            trained_model, part
        )[0]


def test_fusion_on_symmetric_patch_equals_single_prediction(trained_model):
    p15, p16 = symmetric_patches()
    fused = trained_model.hard.predict(p15, p16)
    single = replace(trained_model.hard, fusion_factor=1).predict(p15, p16)
    assert fused[0] == single[0]


def test_with_fusion_factor(trained_model):
    model = trained_model.with_fusion_factor(4)
    assert model.hard.fusion_factor == 4
    assert trained_model.hard.fusion_factor == 2
    with pytest.raises(ValueError):
        trained_model.with_fusion_factor(3)


def test_training_is_deterministic(trained_model):
    images = [(f"img{i}.png", textured_image(seed=i)) for i in range(2)]
    again = LsrTrainer(small_config()).train(images)
    np.testing.assert_array_equal(again.hard.selected_ids, trained_model.hard.selected_ids)
    np.testing.assert_array_equal(again.hard.kmeans.centroids, trained_model.hard.kmeans.centroids)
    lr = YImage(textured_image(16, 16, seed=3).data)
    np.testing.assert_array_equal(
        superresolve(again, lr).data, superresolve(trained_model, lr).data
    )


def test_model_improves_on_lanczos_for_training_image(trained_model):
    pair = ImagePair.from_hr(textured_image(seed=0))
    sr = superresolve(trained_model, pair.lr)
    assert psnr(pair.hr, sr) > psnr(pair.hr, pair.ilr)


def test_constant_image_trains_with_warnings():
    model = train_lsr([YImage.constant(32, 32, 100.0)], small_config())
    assert model.hard is None
    assert any("no hard training samples" in w for w in model.warnings)
    assert model.branch_for(Hardness.HARD) is model.easy
    out = superresolve(model, YImage.constant(8, 8, 100.0))
    np.testing.assert_allclose(out.data, 100.0, atol=1e-6)


def smooth_ramp(height: int = 32, width: int = 32) -> YImage:
    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)
    return YImage(60.0 + 1.5 * rows + cols)


def test_smooth_image_in_textured_corpus():
    trainer = LsrTrainer(small_config())
    images = [("ramp.png", smooth_ramp()), ("img0.png", textured_image(seed=0))]
    easy, hard = trainer.collect(images)
    assert len(hard) > 0
    assert hard.sources == ["img0.png"]
    assert sorted(easy.sources) == ["img0.png", "ramp.png"]
    model = LsrTrainer(small_config()).train(images)
    assert model.easy is not None and model.hard is not None


def test_unreadable_images_only(tmp_path):
    with pytest.raises(TrainingError):
        train_lsr([tmp_path / "missing.png"], small_config())


def test_augmentation_multiplies_training_samples():
    cfg = small_config(augment=True, max_train_samples=800)
    model = LsrTrainer(cfg).train([textured_image(32, 32, seed=2)])
    assert sum(model.easy.train_samples) % 8 == 0
    assert sum(model.hard.train_samples) % 8 == 0


def test_unclustered_scheme():
    cfg = small_config(fusion_scheme=1)
    model = LsrTrainer(cfg).train([textured_image(seed=4)])
    assert model.hard.kmeans is None
    assert model.hard.fusion_factor == 1
    assert len(model.hard.regressors) == 1


def test_custom_types_with_elbow_selection():
    cfg = small_config(variant="custom", hard_types=(4, 5), selection_mode="elbow")
    model = LsrTrainer(cfg).train([textured_image(seed=1)])
    assert model.hard.types == (4, 5)
    assert 1 <= model.hard.feature_count <= model.hard.pool.spec.width


def test_train_from_prepared_samples():
    trainer = LsrTrainer(small_config())
    easy, hard = trainer.collect([("img.png", textured_image(seed=0))])
    model = LsrTrainer(small_config()).train_samples(Dataset.concat([easy, hard]))
    assert model.easy is not None and model.hard is not None


def test_too_many_clusters_for_the_data():
    cfg = small_config(clusters=64, max_train_samples=60)
    with pytest.raises(TrainingError):
        LsrTrainer(cfg).train([textured_image(32, 32, seed=3)])


def test_colour_superresolution(trained_model):
    rng = np.random.default_rng(0)
    rgb = rng.integers(0, 256, (10, 12, 3)).astype(np.uint8)
    out = superresolve_color(trained_model, rgb)
    assert out.shape == (20, 24, 3)
    assert out.dtype == np.uint8


def test_dataset_statistics():
    images = [(f"img{i}.png", textured_image(seed=i)) for i in range(2)]
    table = dataset_statistics(images, small_config())
    assert list(table["image"]) == ["img0.png", "img1.png", "total"]
    total = table.iloc[-1]
    assert total["samples"] == 2 * 48 * 48
    assert total["easy"] + total["hard"] == total["samples"]
    assert 0.0 < total["hard_ratio"] < 1.0
    assert total["hard_mse"] > total["easy_mse"]
