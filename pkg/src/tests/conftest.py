import numpy as np
import pytest

from lsr.config import RunConfig
from lsr.decision.pipeline import LsrTrainer
from lsr.imaging import YImage
from lsr.utils.parallel import ThreadBudget


def textured_image(height: int = 48, width: int = 48, seed: int = 0) -> YImage:
    """Smooth gradient on the left half, strong texture on the right half."""
    rng = np.random.default_rng(seed)
    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)
    smooth = 90.0 + 0.8 * rows + 0.5 * cols
    texture = 60.0 * np.sin(rows / 1.7 + seed) * np.cos(cols / 2.3) + rng.normal(0.0, 12.0, (height, width))
    data = np.where(cols < width // 2, smooth, smooth + texture)
    return YImage(np.clip(data, 0.0, 255.0))


def small_config(**overrides) -> RunConfig:
    values = dict(
        variant="V1",
        easy_features=20,
        hard_features=30,
        easy_trees=3,
        hard_trees=3,
        max_depth=3,
        clusters=2,
        fusion_scheme=3,
        augment=False,
        max_train_samples=1500,
        rft_max_samples=800,
        saab_max_windows=4000,
        chunk_size=512,
    )
    values.update(overrides)
    return RunConfig(**values)


@pytest.fixture
def image():
    return textured_image()


@pytest.fixture
def config():
    return small_config()


@pytest.fixture(scope="session")
def trained_model():
    images = [(f"img{i}.png", textured_image(seed=i)) for i in range(2)]
    return LsrTrainer(small_config()).train(images)


@pytest.fixture(autouse=True)
def single_thread():
    ThreadBudget().configure(1)
    yield
    ThreadBudget().configure(1)
