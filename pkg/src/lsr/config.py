"""Configuration management for the LSR package.

Loads defaults from the packaged ``settings.toml`` and environment variables
using Dynaconf, and turns them into a validated, immutable ``RunConfig`` that
the training and inference code consumes.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from dynaconf import Dynaconf

SETTINGS_PATH = Path(__file__).with_name("settings.toml")

settings = Dynaconf(
    settings_files=[str(SETTINGS_PATH)],
    envvar_prefix="LSR",
)

# Environment variables with the LSR prefix (e.g., LSR_SEED=3) override TOML
# settings. Files passed to load_settings() are layered after the packaged one.

VARIANTS = ("V1", "V2", "custom")

# FU_h -> (use clustering, fusion factor f)
FUSION_SCHEMES: Dict[int, Tuple[bool, int]] = {
    1: (False, 1),
    2: (True, 1),
    3: (True, 2),
    4: (True, 4),
}


class ConfigurationError(ValueError):
    """Exception raised for invalid or inconsistent configuration."""

    pass


def load_settings(config_path: Optional[str] = None) -> Dynaconf:
    """Return a settings object, optionally layering a user TOML file.

    Args:
        config_path: Optional path to a flat ``key = value`` TOML file.

    Returns:
        The packaged settings when no path is given, otherwise a new Dynaconf
        instance with the user file loaded after the packaged defaults.

    Raises:
        ConfigurationError: If the user file does not exist.
    """
    if config_path is None:
        return settings
    if not Path(config_path).is_file():
        raise ConfigurationError(f"config file not found: {config_path}")
    return Dynaconf(
        settings_files=[str(SETTINGS_PATH), str(config_path)],
        envvar_prefix="LSR",
    )


@dataclass(frozen=True)
class RunConfig:
    """Every hyperparameter of one training or inference run.

    Defaults reproduce the easy/hard parameter settings of the LSR method
    (variance threshold 180, 8 clusters, 50/500 trees of depth 6, fusion by 2).
    """

    variant: str = "V1"
    scale: int = 2
    patch_size: int = 15
    hog_patch_size: int = 16
    variance_threshold: float = 180.0
    easy_types: Tuple[int, ...] = (1, 3)
    hard_types: Tuple[int, ...] = (1, 2, 3, 4, 5)
    easy_features: int = 105
    hard_features: int = 374
    selection_mode: str = "fixed_count"
    rft_bins: int = 32
    clusters: int = 8
    fusion_scheme: int = 3
    easy_trees: int = 50
    hard_trees: int = 500
    max_depth: int = 6
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    kmeans_max_iters: int = 100
    kmeans_tol: float = 1e-6
    seed: int = 0
    train_stride: int = 1
    augment: bool = True
    max_train_samples: int = 60000
    rft_max_samples: int = 30000
    saab_max_windows: int = 100000
    chunk_size: int = 4096
    threads: int = 1
    shave: int = 2

    def __post_init__(self) -> None:
        self.validate()

    @property
    def fusion_factor(self) -> int:
        """Number of fused siblings per hard sample (f)."""
        return FUSION_SCHEMES[self.fusion_scheme][1]

    @property
    def use_clustering(self) -> bool:
        return FUSION_SCHEMES[self.fusion_scheme][0]

    @property
    def hard_clusters(self) -> int:
        """Cluster count actually used for the hard branch."""
        return self.clusters if self.use_clustering else 1

    def validate(self) -> None:
        """Check invariants of the configuration.

        Raises:
            ConfigurationError: On any violated invariant.
        """
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.scale != 2:
            raise ConfigurationError("only scale factor 2 is supported")
        if self.fusion_scheme not in FUSION_SCHEMES:
            raise ConfigurationError(f"fusion scheme must be one of {sorted(FUSION_SCHEMES)}")
        for name in ("easy_types", "hard_types"):
            types = getattr(self, name)
            if not types or not set(types) <= {1, 2, 3, 4, 5}:
                raise ConfigurationError(f"{name} must be a non-empty subset of 1..5, got {types}")
        if self.selection_mode not in ("fixed_count", "elbow"):
            raise ConfigurationError(f"unknown selection mode {self.selection_mode!r}")
        positive = (
            "easy_features",
            "hard_features",
            "rft_bins",
            "clusters",
            "easy_trees",
            "hard_trees",
            "max_depth",
            "train_stride",
            "max_train_samples",
            "rft_max_samples",
            "saab_max_windows",
            "chunk_size",
            "threads",
        )
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.rft_bins < 2:
            raise ConfigurationError("rft_bins must be >= 2")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigurationError("learning_rate must be in (0, 1]")
        if self.reg_lambda < 0:
            raise ConfigurationError("reg_lambda must be >= 0")
        if self.variance_threshold < 0:
            raise ConfigurationError("variance_threshold must be >= 0")
        if self.shave < 0:
            raise ConfigurationError("shave must be >= 0")

    @classmethod
    def from_settings(
        cls, source: Optional[Dynaconf] = None, variant: Optional[str] = None, **overrides: Any
    ) -> "RunConfig":
        """Build a RunConfig from Dynaconf settings plus explicit overrides.

        Args:
            source: Settings object (defaults to the packaged settings).
            variant: "V1", "V2" or "custom"; selects the hard-branch types and
                feature count unless they are overridden explicitly.
            **overrides: Field values that take precedence; ``None`` values are
                ignored so CLI options can be passed through unconditionally.

        Returns:
            A validated RunConfig.
        """
        src = source if source is not None else settings
        variant = variant or src.get("variant", "V1")
        if variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
        suffix = "v2" if variant == "V2" else "v1"

        values: Dict[str, Any] = {"variant": variant}
        for name in cls.__dataclass_fields__:
            if name in ("variant", "hard_types", "hard_features"):
                continue
            if src.get(name) is not None:
                values[name] = src.get(name)
        values["hard_types"] = src.get(f"hard_types_{suffix}", cls.hard_types)
        values["hard_features"] = src.get(f"hard_features_{suffix}", cls.hard_features)

        values.update({k: v for k, v in overrides.items() if v is not None})
        for name in ("easy_types", "hard_types"):
            values[name] = tuple(sorted(int(t) for t in values[name]))
        return cls(**values)

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Return a copy with the given (non-None) fields replaced."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_manifest(self) -> Dict[str, Any]:
        """Plain-data view used for the model file's text manifest."""
        data = asdict(self)
        data["easy_types"] = list(self.easy_types)
        data["hard_types"] = list(self.hard_types)
        return data

    @classmethod
    def from_manifest(cls, data: Dict[str, Any]) -> "RunConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        for name in ("easy_types", "hard_types"):
            if name in known:
                known[name] = tuple(known[name])
        return cls(**known)
