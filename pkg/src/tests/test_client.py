import numpy as np
import pandas as pd
import pytest
from typer.testing import CliRunner

from conftest import textured_image
from lsr.client import app
from lsr.imaging import YImage, read_image, write_luma_png, write_rgb_png

runner = CliRunner()

SMALL_SETTINGS = """
easy_features = 20
hard_features_v1 = 30
easy_trees = 3
hard_trees = 3
max_depth = 3
clusters = 2
augment = false
max_train_samples = 1500
rft_max_samples = 800
saab_max_windows = 4000
chunk_size = 512
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    train_dir = root / "train"
    train_dir.mkdir()
    for i in range(2):
        write_luma_png(textured_image(seed=i), train_dir / f"img{i}.png")
    test_dir = root / "set5"
    test_dir.mkdir()
    write_luma_png(textured_image(40, 40, seed=7), test_dir / "a.png")
    config = root / "small.toml"
    config.write_text(SMALL_SETTINGS)
    return root


@pytest.fixture(scope="module")
def model_path(workspace):
    path = workspace / "model.bin"
    result = runner.invoke(
        app,
        [
            "train",
            str(workspace / "train"),
            "--model-out",
            str(path),
            "--config",
            str(workspace / "small.toml"),
        ],
    )
    assert result.exit_code == 0, result.output
    return path


def test_complexity_of_one_method():
    result = runner.invoke(app, ["complexity", "srcnn"])
    assert result.exit_code == 0, result.output
    assert "== srcnn (344x228) ==" in result.output
    assert "M = 57281" in result.output


def test_complexity_csv_of_all_methods(tmp_path):
    csv = tmp_path / "complexity.csv"
    result = runner.invoke(app, ["complexity", "all", "--compare", "--csv", str(csv)])
    assert result.exit_code == 0, result.output
    table = pd.read_csv(csv)
    assert list(table.columns) == ["method", "step", "label", "F", "F_p", "M"]
    assert set(table["method"]) == {"aplus", "srcnn", "vdsr", "lsr-v1", "lsr-v2"}
    assert "F_p_ratio" in result.output


def test_unknown_complexity_method():
    result = runner.invoke(app, ["complexity", "espcn"])
    assert result.exit_code == 2
    assert "Parameter error" in result.output


def test_empty_training_directory(tmp_path):
    result = runner.invoke(app, ["stats", str(tmp_path)])
    assert result.exit_code == 3
    assert "no images found" in result.output


def test_missing_model_file(tmp_path, workspace):
    image = workspace / "train" / "img0.png"
    result = runner.invoke(app, ["sr", str(tmp_path / "missing.bin"), str(image)])
    assert result.exit_code == 4
    assert "Model file error" in result.output


def test_train_needs_exactly_one_source(workspace):
    result = runner.invoke(app, ["train", "--config", str(workspace / "small.toml")])
    assert result.exit_code == 2


def test_missing_config_file(workspace, tmp_path):
    result = runner.invoke(
        app, ["train", str(workspace / "train"), "--config", str(tmp_path / "none.toml")]
    )
    assert result.exit_code == 2
    assert "Configuration error" in result.output


def test_stats(workspace, tmp_path):
    csv = tmp_path / "stats.csv"
    result = runner.invoke(
        app, ["stats", str(workspace / "train"), "--stride", "2", "--csv", str(csv)]
    )
    assert result.exit_code == 0, result.output
    table = pd.read_csv(csv)
    assert table["image"].tolist() == ["img0.png", "img1.png", "total"]
    assert table["samples"].iloc[-1] == 2 * 24 * 24


def test_prepare_then_train_from_samples(workspace, tmp_path):
    samples = tmp_path / "samples.lsrd"
    config = str(workspace / "small.toml")
    result = runner.invoke(
        app,
        ["prepare", str(workspace / "train"), "--output", str(samples), "--config", config],
    )
    assert result.exit_code == 0, result.output
    assert samples.exists()
    model = tmp_path / "cached.bin"
    result = runner.invoke(
        app, ["train", "--samples", str(samples), "--model-out", str(model), "--config", config]
    )
    assert result.exit_code == 0, result.output
    assert "Model (V1) written" in result.output


def test_training_directory_with_a_flat_image(workspace, tmp_path):
    train_dir = tmp_path / "train"
    train_dir.mkdir()
    write_luma_png(YImage.constant(40, 40, 128.0), train_dir / "sky.png")
    write_luma_png(textured_image(seed=0), train_dir / "img0.png")
    config = str(workspace / "small.toml")
    samples = tmp_path / "samples.lsrd"
    result = runner.invoke(
        app, ["prepare", str(train_dir), "--output", str(samples), "--config", config]
    )
    assert result.exit_code == 0, result.output
    model = tmp_path / "flat.bin"
    result = runner.invoke(
        app, ["train", str(train_dir), "--model-out", str(model), "--config", config]
    )
    assert result.exit_code == 0, result.output
    assert model.exists()


def test_custom_training(workspace, tmp_path):
    model = tmp_path / "custom.bin"
    result = runner.invoke(
        app,
        [
            "train",
            str(workspace / "train"),
            "--hard-types",
            "3,5",
            "--hard-features",
            "12",
            "--fusion-scheme",
            "2",
            "--model-out",
            str(model),
            "--config",
            str(workspace / "small.toml"),
        ],
    )
    assert result.exit_code == 0, result.output
    assert "Model (custom) written" in result.output


def test_superresolution(model_path, workspace, tmp_path):
    output = tmp_path / "sr.png"
    image = workspace / "set5" / "a.png"
    result = runner.invoke(app, ["sr", str(model_path), str(image), "--output", str(output)])
    assert result.exit_code == 0, result.output
    luma, _ = read_image(output)
    assert luma.shape == (80, 80)


def test_colour_superresolution(model_path, tmp_path):
    rgb = np.random.default_rng(0).integers(0, 256, (12, 10, 3)).astype(np.uint8)
    source = tmp_path / "rgb.png"
    write_rgb_png(rgb, source)
    colour = tmp_path / "colour.png"
    luma_out = tmp_path / "y.png"
    result = runner.invoke(
        app, ["sr", str(model_path), str(source), "--output", str(luma_out), "--color", str(colour)]
    )
    assert result.exit_code == 0, result.output
    _, out_rgb = read_image(colour)
    assert out_rgb.shape == (24, 20, 3)


def test_variant_mismatch(model_path, workspace):
    image = workspace / "set5" / "a.png"
    result = runner.invoke(app, ["sr", str(model_path), str(image), "--variant", "V2"])
    assert result.exit_code == 4


def test_evaluation(model_path, workspace, tmp_path):
    csv = tmp_path / "scores.csv"
    result = runner.invoke(
        app, ["eval", str(model_path), str(workspace / "set5"), "--csv", str(csv)]
    )
    assert result.exit_code == 0, result.output
    scores = pd.read_csv(csv)
    assert scores["method"].tolist() == ["lanczos", "lsr"]
    assert set(scores["dataset"]) == {"set5"}


def test_inspect_model(model_path, tmp_path):
    curve = tmp_path / "curve.csv"
    result = runner.invoke(
        app, ["inspect-model", str(model_path), "--rft-curve", str(curve), "--complexity"]
    )
    assert result.exit_code == 0, result.output
    assert "format_version: 1" in result.output
    assert "variant: V1" in result.output
    table = pd.read_csv(curve)
    assert list(table.columns) == ["feature_id", "loss"]
    assert table["loss"].is_monotonic_increasing


def test_charts(model_path, tmp_path):
    rft = tmp_path / "rft.png"
    result = runner.invoke(
        app, ["chart", "rft", "--output", str(rft), "--model", str(model_path)]
    )
    assert result.exit_code == 0, result.output
    assert rft.stat().st_size > 0
    bars = tmp_path / "bars.png"
    result = runner.invoke(
        app,
        ["chart", "complexity", "--output", str(bars), "--method", "srcnn", "--method", "lsr-v1"],
    )
    assert result.exit_code == 0, result.output
    assert bars.exists()


def test_unknown_chart_kind(tmp_path):
    result = runner.invoke(app, ["chart", "pie", "--output", str(tmp_path / "x.png")])
    assert result.exit_code == 2
