"""CART decision-tree classifier and the shared flat tree structure.

Split search is vectorized across all candidate features at once: one
stable argsort of the node submatrix, cumulative weight sums, and a single
argmax over the (position, feature) score surface.  Ties are broken toward
the lowest feature index, then the lowest threshold, by scanning the score
surface feature-major.

Zero-gain splits are allowed (min_impurity_decrease defaults to 0.0), so a
tree keeps splitting until leaves are pure or indivisible; this is what
lets it fit XOR-style interactions and deliberately overfit subsamples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataFormatError

# tolerance for "gain is not meaningfully negative" under float noise
_GAIN_EPS = 1e-12


@dataclass
class TreeNodes:
    """Flat array encoding of a binary tree.

    ``feature[i] == -1`` marks a leaf.  Internal nodes route a row left
    when ``row[feature] <= threshold``.  ``class_counts`` carries weighted
    per-class totals for classifier trees; ``leaf_value`` carries node
    means/weights for regression trees.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    class_counts: np.ndarray | None = None
    leaf_value: np.ndarray | None = None

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def leaf_count(self) -> int:
        return int((self.feature < 0).sum())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of X."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            active = np.flatnonzero(self.feature[node] >= 0)
            if active.size == 0:
                return node
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])

    def to_dict(self) -> dict:
        out = {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
        }
        if self.class_counts is not None:
            out["class_counts"] = self.class_counts.tolist()
        if self.leaf_value is not None:
            out["leaf_value"] = self.leaf_value.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "TreeNodes":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            class_counts=(np.asarray(d["class_counts"], dtype=np.float64)
                          if "class_counts" in d else None),
            leaf_value=(np.asarray(d["leaf_value"], dtype=np.float64)
                        if "leaf_value" in d else None),
        )


class _TreeBuilder:
    """Accumulates nodes while a tree is grown; emits TreeNodes."""

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.payload: list = []
        self.max_depth_seen = 0

    def new_node(self, depth: int) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.payload.append(None)
        self.max_depth_seen = max(self.max_depth_seen, depth)
        return len(self.feature) - 1

    def finish(self, classifier: bool) -> TreeNodes:
        n = len(self.feature)
        nodes = TreeNodes(
            feature=np.array(self.feature, dtype=np.int64),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int64),
            right=np.array(self.right, dtype=np.int64),
        )
        if classifier:
            nodes.class_counts = np.array(
                [p if p is not None else (0.0, 0.0) for p in self.payload])
        else:
            values = np.zeros(n)
            for i, p in enumerate(self.payload):
                if p is not None:
                    values[i] = p
            nodes.leaf_value = values
        return nodes


def _midpoint_threshold(lo: float, hi: float) -> float:
    thr = lo / 2.0 + hi / 2.0
    # adjacent floats can round the midpoint up to hi; fall back to lo so
    # that "value <= thr" still separates the two sides
    return lo if thr >= hi else thr


def _best_split_gini(X, y, w, w_total_root):
    """Best weighted-Gini split over all features of a node submatrix.

    Returns (feature, threshold, normalized_decrease) or None when no
    feature has two distinct values.  The decrease is the root-weighted
    impurity drop used both for the stopping rule and importances.
    """
    n, p = X.shape
    order = np.argsort(X, axis=0, kind="stable")
    Xs = np.take_along_axis(X, order, axis=0)
    ws = w[order]
    w1s = (w * y)[order]
    cw = np.cumsum(ws, axis=0)
    cw1 = np.cumsum(w1s, axis=0)
    W = float(w.sum())
    W1 = float((w * y).sum())

    WL = cw[:-1]
    WL1 = cw1[:-1]
    WR = W - WL
    WR1 = W1 - WL1
    with np.errstate(divide="ignore", invalid="ignore"):
        child = WL1 * (WL - WL1) / WL + WR1 * (WR - WR1) / WR
    score = W1 * (W - W1) / W - child
    score[Xs[1:] <= Xs[:-1]] = -np.inf

    flat = np.argmax(score.T)          # feature-major: lowest feature, then threshold
    j, i = divmod(int(flat), n - 1)
    best = score[i, j]
    if not np.isfinite(best):
        return None
    thr = _midpoint_threshold(float(Xs[i, j]), float(Xs[i + 1, j]))
    decrease = 2.0 * max(best, 0.0) / w_total_root
    return j, thr, decrease


class DecisionTreeClassifier:
    """Greedy CART with weighted Gini impurity on binary labels.

    Growth stops at purity, ``max_depth``, ``min_samples_split``, or when no
    split clears ``min_impurity_decrease``.  ``max_features`` enables the
    per-node random feature subsets used by random forests.
    """

    def __init__(self, max_depth: int | None = None, min_samples_split: int = 2,
                 min_impurity_decrease: float = 0.0, max_features: int | None = None,
                 seed: int = 0):
        if min_samples_split < 2:
            raise DataFormatError("min_samples_split must be >= 2")
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_impurity_decrease = min_impurity_decrease
        self.max_features = max_features
        self.seed = seed
        self.nodes_: TreeNodes | None = None
        self.impurity_decreases_: np.ndarray | None = None
        self.depth_: int = 0
        self.n_features_: int = 0

    def fit(self, X, y, sample_weight=None) -> "DecisionTreeClassifier":
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).ravel()
        if X.ndim != 2 or len(X) == 0:
            raise DataFormatError("X must be a non-empty 2-D matrix")
        if len(y) != len(X):
            raise DataFormatError("X and y length mismatch")
        if set(np.unique(y)) - {0.0, 1.0}:
            raise DataFormatError("labels must be 0/1")
        w = (np.ones(len(y)) if sample_weight is None
             else np.asarray(sample_weight, dtype=np.float64).ravel())
        if (w <= 0).any():
            raise DataFormatError("sample weights must be positive")

        self.n_features_ = X.shape[1]
        rng = np.random.default_rng(self.seed)
        builder = _TreeBuilder()
        decreases = np.zeros(self.n_features_)
        w_root = float(w.sum())

        # explicit stack; overfit trees can exceed the recursion limit
        root = builder.new_node(0)
        stack = [(np.arange(len(y)), 0, root)]
        while stack:
            idx, depth, slot = stack.pop()
            yn = y[idx]
            wn = w[idx]
            c1 = float((wn * yn).sum())
            c0 = float(wn.sum()) - c1
            builder.payload[slot] = (c0, c1)

            if (len(idx) < self.min_samples_split
                    or (self.max_depth is not None and depth >= self.max_depth)
                    or (yn == yn[0]).all()):
                continue
            Xn = X[idx]
            if self.max_features is not None and self.max_features < self.n_features_:
                subset = np.sort(rng.permutation(self.n_features_)[:self.max_features])
                found = _best_split_gini(Xn[:, subset], yn, wn, w_root)
                if found is not None:
                    found = (int(subset[found[0]]), found[1], found[2])
            else:
                found = _best_split_gini(Xn, yn, wn, w_root)
            if found is None:
                continue
            j, thr, decrease = found
            if decrease + _GAIN_EPS < self.min_impurity_decrease:
                continue
            go_left = Xn[:, j] <= thr
            decreases[j] += decrease
            builder.feature[slot] = j
            builder.threshold[slot] = thr
            left_slot = builder.new_node(depth + 1)
            right_slot = builder.new_node(depth + 1)
            builder.left[slot] = left_slot
            builder.right[slot] = right_slot
            stack.append((idx[~go_left], depth + 1, right_slot))
            stack.append((idx[go_left], depth + 1, left_slot))

        self.nodes_ = builder.finish(classifier=True)
        self.impurity_decreases_ = decreases
        self.depth_ = builder.max_depth_seen
        return self

    def predict_proba(self, X) -> np.ndarray:
        leaf = self.nodes_.apply(X)
        counts = self.nodes_.class_counts[leaf]
        totals = counts.sum(axis=1, keepdims=True)
        return counts / totals

    def predict(self, X) -> np.ndarray:
        leaf = self.nodes_.apply(X)
        counts = self.nodes_.class_counts[leaf]
        # leaf tie goes to class 0
        return (counts[:, 1] > counts[:, 0]).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "params": {
                "max_depth": self.max_depth,
                "min_samples_split": self.min_samples_split,
                "min_impurity_decrease": self.min_impurity_decrease,
                "max_features": self.max_features,
                "seed": self.seed,
            },
            "nodes": self.nodes_.to_dict(),
            "impurity_decreases": self.impurity_decreases_.tolist(),
            "depth": self.depth_,
            "n_features": self.n_features_,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTreeClassifier":
        model = cls(**d["params"])
        model.nodes_ = TreeNodes.from_dict(d["nodes"])
        model.impurity_decreases_ = np.asarray(d["impurity_decreases"])
        model.depth_ = d["depth"]
        model.n_features_ = d["n_features"]
        return model
