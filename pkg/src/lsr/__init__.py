"""LSR super-resolution package.

Lightweight x2 single-image super-resolution with hand-crafted patch
representations, relevant-feature selection and boosted-tree residual
regression, plus an exact FLOPs/model-size calculator for comparing SR
methods.
"""

from . import (
    chartGenerator,  # noqa: F401
    client,  # noqa: F401
    complexityCalculator,  # noqa: F401
    config,  # noqa: F401
    decision,  # noqa: F401
    evaluator,  # noqa: F401
    imaging,  # noqa: F401
    patches,  # noqa: F401
    representations,  # noqa: F401
    rft,  # noqa: F401
    sampleCache,  # noqa: F401
    utils,  # noqa: F401
)

__all__ = [
    "chartGenerator",
    "client",
    "complexityCalculator",
    "config",
    "decision",
    "evaluator",
    "imaging",
    "patches",
    "representations",
    "rft",
    "sampleCache",
    "utils",
]
