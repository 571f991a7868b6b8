"""Relevant Feature Test.

Every feature column is scored by the best single-threshold split of the
residual targets: the samples on each side are predicted by their side mean
and the loss is the resulting sample-weighted MSE. Candidate thresholds are
the interior edges of a uniform partition of the feature's range. Features
with the lowest losses are kept.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd

from lsr.utils.parallel import ThreadBudget

SELECTION_MODES = ("fixed_count", "elbow")
COLUMN_BLOCK = 64


class SelectionError(ValueError):
    """Exception raised for invalid feature-selection parameters."""

    pass


@dataclass(frozen=True)
class RftScore:
    feature_id: int
    loss: float
    best_threshold: float


@dataclass
class FeatureSelection:
    """Outcome of scoring a pool.

    Attributes:
        selected_ids: Kept feature ids, ascending loss (ties by smaller id).
        count: Number of kept features.
        full_curve: Losses of every feature, sorted ascending.
        curve_ids: Feature ids in the order of ``full_curve``.
        thresholds: Best threshold per feature id (NaN for constant features).
        mode: Selection mode that produced ``selected_ids``.
    """

    selected_ids: np.ndarray
    count: int
    full_curve: np.ndarray
    curve_ids: np.ndarray
    thresholds: np.ndarray
    mode: str = "fixed_count"

    @property
    def losses(self) -> np.ndarray:
        """Loss per feature id."""
        out = np.empty_like(self.full_curve)
        out[self.curve_ids] = self.full_curve
        return out

    def score(self, feature_id: int) -> RftScore:
        return RftScore(
            feature_id=int(feature_id),
            loss=float(self.losses[feature_id]),
            best_threshold=float(self.thresholds[feature_id]),
        )

    def to_frame(self) -> pd.DataFrame:
        """Sorted loss curve as a (rank, feature_id, loss, selected) table."""
        return pd.DataFrame(
            {
                "rank": np.arange(len(self.curve_ids)),
                "feature_id": self.curve_ids,
                "loss": self.full_curve,
                "selected": np.arange(len(self.curve_ids)) < self.count,
            }
        )


def _check(values: np.ndarray, targets: np.ndarray, bins: int) -> None:
    if bins < 2:
        raise SelectionError(f"bins must be >= 2, got {bins}")
    if len(values) != len(targets):
        raise SelectionError(f"{len(values)} feature values for {len(targets)} targets")
    if len(values) < 2:
        raise SelectionError("the relevant feature test needs at least 2 samples")


def _column_loss(values: np.ndarray, centered: np.ndarray, total_sse: float, bins: int):
    n = len(values)
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        return total_sse / n, float("nan")

    thresholds = lo + np.arange(1, bins) * (hi - lo) / bins
    # bucket b holds values in (t[b-1], t[b]]; the left set of t[b] is buckets <= b
    bucket = np.searchsorted(thresholds, values, side="left")
    n_left = np.cumsum(np.bincount(bucket, minlength=bins))[:-1].astype(np.float64)
    s_left = np.cumsum(np.bincount(bucket, weights=centered, minlength=bins))[:-1]
    q_left = np.cumsum(np.bincount(bucket, weights=centered * centered, minlength=bins))[:-1]
    n_right = n - n_left
    s_right = centered.sum() - s_left
    q_right = total_sse - q_left

    valid = (n_left > 0) & (n_right > 0)
    if not valid.any():
        return total_sse / n, float("nan")
    with np.errstate(divide="ignore", invalid="ignore"):
        sse = q_left - s_left**2 / n_left + q_right - s_right**2 / n_right
    sse = np.where(valid, np.maximum(sse, 0.0), np.inf)
    best = int(np.argmin(sse))
    return float(sse[best]) / n, float(thresholds[best])


def rft_loss(values, targets, bins: int = 32, feature_id: int = 0) -> RftScore:
    """Best single-split regression MSE of one feature.

    Args:
        values: Per-sample feature scalars.
        targets: Per-sample residual targets.
        bins: Number of uniform bins; ``bins - 1`` interior edges are tried.
        feature_id: Id recorded on the returned score.

    Returns:
        The minimum loss over all thresholds that leave both sides
        non-empty. A constant feature yields the full-set MSE about the mean
        and a NaN threshold.

    Raises:
        SelectionError: On fewer than 2 samples, mismatched lengths or bins < 2.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    y = np.asarray(targets, dtype=np.float64).ravel()
    _check(x, y, bins)
    centered = y - y.mean()
    total_sse = float(np.dot(centered, centered))
    loss, threshold = _column_loss(x, centered, total_sse, bins)
    return RftScore(feature_id=feature_id, loss=loss, best_threshold=threshold)


def score_pool(pool: np.ndarray, targets, bins: int = 32) -> tuple[np.ndarray, np.ndarray]:
    """RFT loss and best threshold for every column, in feature-id order."""
    matrix = np.asarray(pool, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] == 0:
        raise SelectionError("feature pool must be a non-empty 2-D matrix")
    y = np.asarray(targets, dtype=np.float64).ravel()
    _check(matrix[:, 0], y, bins)
    centered = y - y.mean()
    total_sse = float(np.dot(centered, centered))

    def score_block(start: int):
        block = matrix[:, start : start + COLUMN_BLOCK]
        return [_column_loss(block[:, j], centered, total_sse, bins) for j in range(block.shape[1])]

    results: List[tuple] = []
    for part in ThreadBudget().map(score_block, range(0, matrix.shape[1], COLUMN_BLOCK)):
        results.extend(part)
    losses = np.array([r[0] for r in results])
    thresholds = np.array([r[1] for r in results])
    return losses, thresholds


def elbow_count(sorted_losses: np.ndarray) -> int:
    """Number of features up to the elbow of an ascending loss curve.

    Both axes are scaled to [0, 1]; the elbow is the point farthest from the
    chord joining the first and last points (first such point on ties).
    """
    n = len(sorted_losses)
    if n <= 2:
        return n
    span = float(sorted_losses[-1] - sorted_losses[0])
    if span <= 0.0:
        return n
    x = np.arange(n) / (n - 1)
    y = (sorted_losses - sorted_losses[0]) / span
    return int(np.argmax(np.abs(x - y))) + 1


def select_features(
    pool: np.ndarray,
    targets,
    mode: str = "fixed_count",
    count: Optional[int] = None,
    bins: int = 32,
) -> FeatureSelection:
    """Score every pool column and keep the lowest-loss ones.

    Args:
        pool: (samples, features) representation matrix.
        targets: Residual targets.
        mode: ``fixed_count`` (keep ``count``) or ``elbow``.
        count: Number of features for ``fixed_count``.
        bins: Uniform bins per feature.

    Raises:
        SelectionError: On an unknown mode or a count outside 1..width.
    """
    if mode not in SELECTION_MODES:
        raise SelectionError(f"unknown selection mode {mode!r}; expected one of {SELECTION_MODES}")
    losses, thresholds = score_pool(pool, targets, bins)
    width = len(losses)
    ids = np.arange(width)
    order = np.lexsort((ids, losses))
    curve = losses[order]

    if mode == "fixed_count":
        if count is None or not 1 <= count <= width:
            raise SelectionError(f"feature count must be in 1..{width}, got {count}")
        keep = int(count)
    else:
        keep = elbow_count(curve)

    return FeatureSelection(
        selected_ids=order[:keep].astype(np.int64),
        count=keep,
        full_curve=curve,
        curve_ids=order.astype(np.int64),
        thresholds=thresholds,
        mode=mode,
    )
