"""CART classification tree with Gini splits (benchmark model)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .logistic import TrainingError, check_features, check_labels, oversample


@dataclass
class TreeConfig:
    max_depth: int = 6
    min_leaf: int = 20
    seed: int = 0
    resample: bool = True


@dataclass
class Node:
    prob: float
    n: int
    feature: int = -1
    threshold: float = 0.0
    left: "Node | None" = None
    right: "Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _gini(pos, n):
    p = pos / n
    return 2.0 * p * (1.0 - p)


def _best_split(X: np.ndarray, y: np.ndarray, min_leaf: int):
    """Lowest weighted Gini split; ties go to the lower feature, then threshold."""
    n, k = X.shape
    best = None
    best_score = np.inf
    for j in range(k):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        cum = np.cumsum(y[order])
        # candidate cut after position c (left = first c+1 rows)
        cuts = np.flatnonzero(xs[1:] > xs[:-1])
        nl = cuts + 1
        ok = (nl >= min_leaf) & (n - nl >= min_leaf)
        if not ok.any():
            continue
        cuts, nl = cuts[ok], nl[ok]
        pl = cum[cuts]
        pr = cum[-1] - pl
        nr = n - nl
        score = (nl * _gini(pl, nl) + nr * _gini(pr, nr)) / n
        c = int(np.argmin(score))
        if score[c] < best_score - 1e-12:
            best_score = float(score[c])
            best = (j, 0.5 * (xs[cuts[c]] + xs[cuts[c] + 1]))
    return best


def _grow(X, y, depth, cfg: TreeConfig) -> Node:
    n = len(y)
    pos = float(y.sum())
    node = Node(prob=pos / n, n=n)
    if depth >= cfg.max_depth or pos == 0 or pos == n or n < 2 * cfg.min_leaf:
        return node
    split = _best_split(X, y, cfg.min_leaf)
    if split is None:
        return node
    j, thr = split
    mask = X[:, j] <= thr
    node.feature, node.threshold = int(j), float(thr)
    node.left = _grow(X[mask], y[mask], depth + 1, cfg)
    node.right = _grow(X[~mask], y[~mask], depth + 1, cfg)
    return node


@dataclass
class DecisionTreeModel:
    root: Node
    n_features: int
    feature_names: tuple = field(default_factory=tuple)

    def predict_proba(self, X) -> np.ndarray:
        X = check_features(X)
        out = np.empty(len(X))
        for r in range(len(X)):
            node = self.root
            while not node.is_leaf:
                node = node.left if X[r, node.feature] <= node.threshold else node.right
            out[r] = node.prob
        return out

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(X) >= threshold).astype(np.int8)

    def depth(self) -> int:
        def d(node):
            return 0 if node.is_leaf else 1 + max(d(node.left), d(node.right))

        return d(self.root)

    def n_leaves(self) -> int:
        def c(node):
            return 1 if node.is_leaf else c(node.left) + c(node.right)

        return c(self.root)


def train_tree(X, y, cfg: TreeConfig | None = None, feature_names=None) -> DecisionTreeModel:
    cfg = cfg or TreeConfig()
    X = check_features(X)
    y = check_labels(y, X.shape[0])
    if len(y) == 0:
        raise TrainingError("no training rows")
    if cfg.resample and 0 < y.sum() < len(y):
        X, y = oversample(X, y, np.random.default_rng(cfg.seed))
    root = _grow(X, y, 0, cfg)
    return DecisionTreeModel(root, X.shape[1], tuple(feature_names or ()))
