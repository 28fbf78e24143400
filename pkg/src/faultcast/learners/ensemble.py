"""Randomized tree ensembles: extra-trees regressor and random forest.

Per-tree random streams derive from (seed, tree_index), so results do not
depend on training order or thread scheduling.
"""

from __future__ import annotations

import numpy as np

from ..errors import DataFormatError
from .tree import DecisionTreeClassifier, TreeNodes, _TreeBuilder


def _fit_random_threshold_tree(X, y, max_depth, min_samples_split, rng, decreases):
    """Grow one extremely randomized tree.

    Split search draws a single uniform threshold per feature from the
    node's value range (no exhaustive scan) and keeps the feature with the
    best variance reduction.  The rng is consumed node by node in LIFO
    traversal order, which is part of the deterministic contract.
    """
    n, p = X.shape
    builder = _TreeBuilder()
    root = builder.new_node(0)
    stack = [(np.arange(n), 0, root)]
    while stack:
        idx, depth, slot = stack.pop()
        yn = y[idx]
        n_node = len(idx)
        total = float(yn.sum())
        total_sq = float(yn @ yn)
        builder.payload[slot] = total / n_node
        if (n_node < min_samples_split
                or (max_depth is not None and depth >= max_depth)):
            continue
        sse_parent = total_sq - total * total / n_node
        if sse_parent <= 1e-12:     # constant target
            continue
        Xn = X[idx]
        lo = Xn.min(axis=0)
        hi = Xn.max(axis=0)
        spread = hi - lo
        if not spread.any():
            continue
        thr = lo + rng.random(p) * spread
        left = Xn <= thr
        n_left = left.sum(axis=0)
        moments = np.vstack((yn, yn * yn)) @ left
        n_right = n_node - n_left
        sum_right = total - moments[0]
        sq_right = total_sq - moments[1]
        ok = (spread > 0) & (n_left > 0) & (n_right > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            score = (sse_parent
                     - (moments[1] - moments[0] * moments[0] / n_left)
                     - (sq_right - sum_right * sum_right / n_right))
        score[~ok] = -np.inf
        j = int(np.argmax(score))
        if not np.isfinite(score[j]):
            continue
        decreases[j] += max(float(score[j]), 0.0)
        go_left = left[:, j]
        builder.feature[slot] = j
        builder.threshold[slot] = float(thr[j])
        left_slot = builder.new_node(depth + 1)
        right_slot = builder.new_node(depth + 1)
        builder.left[slot] = left_slot
        builder.right[slot] = right_slot
        stack.append((idx[~go_left], depth + 1, right_slot))
        stack.append((idx[go_left], depth + 1, left_slot))
    return builder.finish(classifier=False)


class ExtraTreesRegressor:
    """Extremely randomized trees: whole sample per tree (no bootstrap),
    one random threshold per candidate feature per node, mean aggregation."""

    def __init__(self, n_trees: int = 50, max_depth: int | None = None,
                 min_samples_split: int = 2, seed: int = 0):
        if n_trees < 1:
            raise DataFormatError("n_trees must be >= 1")
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.seed = seed
        self.trees_: list[TreeNodes] = []
        self.impurity_decreases_: np.ndarray | None = None

    def fit(self, X, y) -> "ExtraTreesRegressor":
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).ravel()
        if len(X) < 2:
            raise DataFormatError("need at least 2 rows")
        self.impurity_decreases_ = np.zeros(X.shape[1])
        self.trees_ = []
        for t in range(self.n_trees):
            rng = np.random.default_rng(np.random.SeedSequence([self.seed, t]))
            self.trees_.append(_fit_random_threshold_tree(
                X, y, self.max_depth, self.min_samples_split, rng,
                self.impurity_decreases_))
        return self

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        out = np.zeros(len(X))
        for tree in self.trees_:
            out += tree.leaf_value[tree.apply(X)]
        return out / self.n_trees

    def to_dict(self) -> dict:
        return {
            "params": {"n_trees": self.n_trees, "max_depth": self.max_depth,
                       "min_samples_split": self.min_samples_split,
                       "seed": self.seed},
            "trees": [t.to_dict() for t in self.trees_],
            "impurity_decreases": self.impurity_decreases_.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExtraTreesRegressor":
        model = cls(**d["params"])
        model.trees_ = [TreeNodes.from_dict(t) for t in d["trees"]]
        model.impurity_decreases_ = np.asarray(d["impurity_decreases"])
        return model


class RandomForestClassifier:
    """Bootstrap rows per tree, ceil(sqrt(p)) random features per node,
    majority vote with ties going to class 0."""

    def __init__(self, n_trees: int = 100, max_depth: int | None = None,
                 min_samples_split: int = 2, seed: int = 0):
        if n_trees < 1:
            raise DataFormatError("n_trees must be >= 1")
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.seed = seed
        self.trees_: list[DecisionTreeClassifier] = []
        self.impurity_decreases_: np.ndarray | None = None

    def fit(self, X, y) -> "RandomForestClassifier":
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64).ravel()
        if len(X) == 0:
            raise DataFormatError("X must be non-empty")
        p = X.shape[1]
        k = int(np.ceil(np.sqrt(p)))
        self.impurity_decreases_ = np.zeros(p)
        self.trees_ = []
        for t in range(self.n_trees):
            rng = np.random.default_rng(np.random.SeedSequence([self.seed, t]))
            boot = rng.integers(0, len(X), len(X))
            tree = DecisionTreeClassifier(
                max_depth=self.max_depth,
                min_samples_split=self.min_samples_split,
                max_features=k,
                seed=int(rng.integers(0, 2**31 - 1)))
            tree.fit(X[boot], y[boot])
            self.trees_.append(tree)
            self.impurity_decreases_ += tree.impurity_decreases_
        return self

    def predict(self, X) -> np.ndarray:
        votes = np.zeros(len(X), dtype=np.int64)
        for tree in self.trees_:
            votes += tree.predict(X)
        return (votes * 2 > self.n_trees).astype(np.int64)

    def predict_proba(self, X) -> np.ndarray:
        votes = np.zeros(len(X))
        for tree in self.trees_:
            votes += tree.predict(X)
        p1 = votes / self.n_trees
        return np.column_stack([1.0 - p1, p1])

    def to_dict(self) -> dict:
        return {
            "params": {"n_trees": self.n_trees, "max_depth": self.max_depth,
                       "min_samples_split": self.min_samples_split,
                       "seed": self.seed},
            "trees": [t.to_dict() for t in self.trees_],
            "impurity_decreases": self.impurity_decreases_.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForestClassifier":
        model = cls(**d["params"])
        model.trees_ = [DecisionTreeClassifier.from_dict(t) for t in d["trees"]]
        model.impurity_decreases_ = np.asarray(d["impurity_decreases"])
        return model
