import pytest

from lsr.config import ConfigurationError, RunConfig, load_settings


def test_defaults_reproduce_reference_settings():
    cfg = RunConfig.from_settings()
    assert cfg.variant == "V1"
    assert cfg.scale == 2
    assert cfg.variance_threshold == 180.0
    assert cfg.easy_types == (1, 3)
    assert cfg.hard_types == (1, 2, 3, 4, 5)
    assert (cfg.easy_features, cfg.hard_features) == (105, 374)
    assert (cfg.easy_trees, cfg.hard_trees, cfg.max_depth) == (50, 500, 6)
    assert cfg.clusters == 8
    assert cfg.rft_bins == 32
    assert cfg.fusion_factor == 2


def test_v2_variant():
    cfg = RunConfig.from_settings(variant="V2")
    assert cfg.hard_types == (5,)
    assert cfg.hard_features == 135


def test_overrides_skip_none():
    cfg = RunConfig.from_settings(seed=None, clusters=4)
    assert cfg.seed == 0
    assert cfg.clusters == 4


@pytest.mark.parametrize(
    "scheme, clustering, factor", [(1, False, 1), (2, True, 1), (3, True, 2), (4, True, 4)]
)
def test_fusion_schemes(scheme, clustering, factor):
    cfg = RunConfig(fusion_scheme=scheme)
    assert cfg.use_clustering is clustering
    assert cfg.fusion_factor == factor
    assert cfg.hard_clusters == (8 if clustering else 1)


@pytest.mark.parametrize(
    "overrides",
    [
        {"scale": 3},
        {"fusion_scheme": 5},
        {"hard_types": (6,)},
        {"easy_types": ()},
        {"selection_mode": "best"},
        {"clusters": 0},
        {"learning_rate": 0.0},
        {"variant": "V3"},
    ],
)
def test_invalid_configuration(overrides):
    with pytest.raises(ConfigurationError):
        RunConfig(**overrides)


def test_env_override(monkeypatch, tmp_path):
    path = tmp_path / "empty.toml"
    path.write_text("")
    monkeypatch.setenv("LSR_SEED", "3")
    cfg = RunConfig.from_settings(load_settings(str(path)))
    assert cfg.seed == 3


def test_user_config_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("seed = 42\nhard_trees = 10\n")
    cfg = RunConfig.from_settings(load_settings(str(path)))
    assert cfg.seed == 42
    assert cfg.hard_trees == 10
    assert cfg.easy_trees == 50


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_settings(str(tmp_path / "missing.toml"))


def test_manifest_round_trip():
    cfg = RunConfig(variant="custom", hard_types=(2, 5), hard_features=40, seed=9)
    assert RunConfig.from_manifest(cfg.to_manifest()) == cfg
