"""Decision learning: HOG clustering, boosted trees and the LSR pipeline."""

from . import gbtRegressor, hog, kmeans, modelStore, pipeline  # noqa: F401

__all__ = [
    "gbtRegressor",
    "hog",
    "kmeans",
    "modelStore",
    "pipeline",
]
