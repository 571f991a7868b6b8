"""Gradient-boosted regression trees with a squared-error objective.

Each round fits one tree by exact greedy search over every feature and every
split point between distinct sorted values, scoring splits with the
second-order gain under l2 leaf regularization. Leaves store the raw weight
-G / (H + lambda); predictions are ``base_score + learning_rate * sum``.
Training is deterministic: no row or column subsampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

MIN_GAIN = 1e-12


class TreeTrainingError(ValueError):
    """Exception raised for invalid boosting inputs."""

    pass


@dataclass
class RegressionTree:
    """A binary tree stored as pre-order node arrays.

    ``feature[i] == -1`` marks a leaf whose output is ``value[i]``. Internal
    nodes send a sample left iff ``x[feature] <= threshold``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(len(self.feature))

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    @property
    def n_params(self) -> int:
        """Feature index and threshold per internal node, weight per leaf."""
        internal = self.n_nodes - self.n_leaves
        return 2 * internal + self.n_leaves

    def depth(self, node: int = 0) -> int:
        if self.feature[node] < 0:
            return 0
        return 1 + max(self.depth(int(self.left[node])), self.depth(int(self.right[node])))

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Leaf weight reached by every row of ``x``."""
        rows = np.arange(len(x))
        node = np.zeros(len(x), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            feat = self.feature[node[active]]
            go_left = x[rows[active], feat] <= self.threshold[node[active]]
            node[active] = np.where(go_left, self.left[node[active]], self.right[node[active]])
            active = self.feature[node] >= 0
        return self.value[node]

    def predict_one(self, x: np.ndarray) -> float:
        node = 0
        while self.feature[node] >= 0:
            if x[self.feature[node]] <= self.threshold[node]:
                node = int(self.left[node])
            else:
                node = int(self.right[node])
        return float(self.value[node])


@dataclass
class GbtRegressor:
    """Boosted ensemble.

    Attributes:
        trees: Fitted trees in boosting order.
        base_score: Initial prediction (mean of the training targets).
        learning_rate: Shrinkage applied to every tree's output.
        max_depth: Depth limit used during training.
        reg_lambda: l2 regularization of leaf weights.
        n_features: Width of the feature vectors the trees index into.
    """

    trees: List[RegressionTree] = field(default_factory=list)
    base_score: float = 0.0
    learning_rate: float = 0.1
    max_depth: int = 6
    reg_lambda: float = 1.0
    n_features: int = 0

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def n_params(self) -> int:
        return sum(tree.n_params for tree in self.trees)

    def max_feature_index(self) -> int:
        used = [int(t.feature.max()) for t in self.trees if t.n_nodes]
        return max(used, default=-1)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Predictions for a (samples, features) matrix."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        total = np.zeros(len(x))
        for tree in self.trees:
            total += tree.predict(x)
        return self.base_score + self.learning_rate * total


def _grow_tree(
    x: np.ndarray,
    grad: np.ndarray,
    order: np.ndarray,
    max_depth: int,
    reg_lambda: float,
    leaf_of_sample: np.ndarray,
) -> RegressionTree:
    """Exact greedy tree on presorted columns.

    ``order`` is (d, m): for each feature the sample ids sorted by that
    feature. Every node keeps the same layout for its own samples.
    """
    d = x.shape[1]
    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[float] = []
    goes_left = np.zeros(len(x), dtype=bool)
    cols = np.arange(d)[:, None]

    def grow(idx: np.ndarray, depth: int) -> int:
        rows = idx[0]
        m = len(rows)
        g_total = float(grad[rows].sum())
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(-g_total / (m + reg_lambda))

        if depth < max_depth and m >= 2:
            xs = x[idx, cols]
            g_left = np.cumsum(grad[idx], axis=1)[:, :-1]
            h_left = np.arange(1, m, dtype=np.float64)
            g_right = g_total - g_left
            gain = (
                g_left**2 / (h_left + reg_lambda)
                + g_right**2 / (m - h_left + reg_lambda)
                - g_total**2 / (m + reg_lambda)
            )
            gain = np.where(xs[:, :-1] < xs[:, 1:], gain, -np.inf)
            best = int(np.argmax(gain))
            f, k = divmod(best, m - 1)
            if gain[f, k] > MIN_GAIN:
                feature[node] = f
                threshold[node] = float(xs[f, k])
                goes_left[idx[f, : k + 1]] = True
                mask = goes_left[idx]
                left_idx = idx[mask].reshape(d, -1)
                right_idx = idx[~mask].reshape(d, -1)
                goes_left[rows] = False
                left[node] = grow(left_idx, depth + 1)
                right[node] = grow(right_idx, depth + 1)
                return node

        leaf_of_sample[rows] = value[node]
        return node

    grow(order, 0)
    return RegressionTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=np.float64),
    )


def gbt_train(
    features: np.ndarray,
    targets: np.ndarray,
    n_trees: int,
    max_depth: int = 6,
    learning_rate: float = 0.1,
    reg_lambda: float = 1.0,
    history: Optional[List[float]] = None,
) -> GbtRegressor:
    """Fit a boosted ensemble.

    Args:
        features: (samples, d) training matrix.
        targets: (samples,) regression targets.
        n_trees: Boosting rounds.
        max_depth: Depth limit per tree.
        learning_rate: Shrinkage.
        reg_lambda: l2 leaf regularization.
        history: If given, receives the training MSE after every round.

    Raises:
        TreeTrainingError: On fewer than 2 samples or mismatched shapes.
    """
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    y = np.asarray(targets, dtype=np.float64).ravel()
    if len(x) != len(y):
        raise TreeTrainingError(f"{len(x)} feature rows for {len(y)} targets")
    if len(y) < 2:
        raise TreeTrainingError("gradient boosting needs at least 2 samples")
    if n_trees < 0 or max_depth < 0:
        raise TreeTrainingError("tree count and depth must be non-negative")

    base = float(y.mean())
    model = GbtRegressor(
        base_score=base,
        learning_rate=learning_rate,
        max_depth=max_depth,
        reg_lambda=reg_lambda,
        n_features=x.shape[1],
    )
    order = np.ascontiguousarray(np.argsort(x, axis=0, kind="stable").T)
    pred = np.full(len(y), base)
    leaf_of_sample = np.zeros(len(y))
    for _ in range(n_trees):
        grad = pred - y
        tree = _grow_tree(x, grad, order, max_depth, reg_lambda, leaf_of_sample)
        model.trees.append(tree)
        pred += learning_rate * leaf_of_sample
        if history is not None:
            history.append(float(np.mean((pred - y) ** 2)))
    return model


def gbt_predict(regressor: GbtRegressor, x: np.ndarray) -> float:
    """Prediction for one selected-feature vector."""
    x = np.asarray(x, dtype=np.float64).ravel()
    total = sum(tree.predict_one(x) for tree in regressor.trees)
    return regressor.base_score + regressor.learning_rate * total
