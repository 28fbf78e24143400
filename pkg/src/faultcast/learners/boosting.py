"""Second-order gradient boosting on logistic loss.

Each round fits a regression tree to per-sample gradients and hessians;
leaf weights are the Newton step -sum(g)/(sum(h)+lambda) and split quality
is the matching gain expression.  Optional per-class weights scale g, h,
the prior, and the recorded training loss.
"""

from __future__ import annotations

import numpy as np

from ..errors import DataFormatError
from .tree import TreeNodes, _TreeBuilder, _midpoint_threshold

_GAIN_EPS = 1e-12


def _best_split_grad(X, g, h, reg_lambda):
    """Maximize 0.5*(GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)) over all splits."""
    n, p = X.shape
    order = np.argsort(X, axis=0, kind="stable")
    Xs = np.take_along_axis(X, order, axis=0)
    cg = np.cumsum(g[order], axis=0)
    ch = np.cumsum(h[order], axis=0)
    G = float(g.sum())
    H = float(h.sum())

    GL = cg[:-1]
    HL = ch[:-1]
    GR = G - GL
    HR = H - HL
    gain = 0.5 * (GL * GL / (HL + reg_lambda)
                  + GR * GR / (HR + reg_lambda)
                  - G * G / (H + reg_lambda))
    gain[Xs[1:] <= Xs[:-1]] = -np.inf

    flat = np.argmax(gain.T)
    j, i = divmod(int(flat), n - 1)
    best = float(gain[i, j])
    if not np.isfinite(best) or best <= _GAIN_EPS:
        return None
    thr = _midpoint_threshold(float(Xs[i, j]), float(Xs[i + 1, j]))
    return j, thr, best


def _fit_gradient_tree(X, g, h, max_depth, reg_lambda, min_samples_split,
                       decreases):
    builder = _TreeBuilder()
    root = builder.new_node(0)
    stack = [(np.arange(len(g)), 0, root)]
    while stack:
        idx, depth, slot = stack.pop()
        gn = g[idx]
        hn = h[idx]
        builder.payload[slot] = -gn.sum() / (hn.sum() + reg_lambda)
        if len(idx) < min_samples_split or depth >= max_depth:
            continue
        found = _best_split_grad(X[idx], gn, hn, reg_lambda)
        if found is None:
            continue
        j, thr, gain = found
        decreases[j] += gain
        go_left = X[idx, j] <= thr
        builder.feature[slot] = j
        builder.threshold[slot] = thr
        left_slot = builder.new_node(depth + 1)
        right_slot = builder.new_node(depth + 1)
        builder.left[slot] = left_slot
        builder.right[slot] = right_slot
        stack.append((idx[~go_left], depth + 1, right_slot))
        stack.append((idx[go_left], depth + 1, left_slot))
    return builder.finish(classifier=False)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def class_weight_vector(y, class_weights):
    """Per-sample weights from a (w0, w1) pair, or 'balanced' for
    inverse-class-frequency weights normalized to mean 1."""
    y = np.asarray(y)
    if class_weights is None:
        return np.ones(len(y))
    if class_weights == "balanced":
        n = len(y)
        n1 = int(y.sum())
        n0 = n - n1
        class_weights = (n / (2.0 * n0), n / (2.0 * n1))
    w0, w1 = class_weights
    return np.where(y == 1, float(w1), float(w0))


class GradientBoostedClassifier:
    """Boosted regression trees with a logistic link.

    predicted probability = sigmoid(base_score + lr * sum of tree outputs);
    predict() is 1 iff that probability >= 0.5.  ``train_loss_`` records the
    (weighted) mean log-loss after every round; it is expected to be
    non-increasing and tests assert that.
    """

    def __init__(self, n_estimators: int = 100, learning_rate: float = 0.3,
                 max_depth: int = 6, reg_lambda: float = 1.0,
                 class_weights=None, min_samples_split: int = 2, seed: int = 0):
        if n_estimators < 1:
            raise DataFormatError("n_estimators must be >= 1")
        self.n_estimators = n_estimators
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.reg_lambda = reg_lambda
        self.class_weights = class_weights
        self.min_samples_split = min_samples_split
        self.seed = seed
        self.base_score_: float = 0.0
        self.trees_: list[TreeNodes] = []
        self.train_loss_: list[float] = []
        self.impurity_decreases_: np.ndarray | None = None
        self.n_features_: int = 0

    def fit(self, X, y) -> "GradientBoostedClassifier":
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).ravel()
        if len(np.unique(y)) < 2:
            raise DataFormatError("training target has a single class")
        w = class_weight_vector(y, self.class_weights)
        self.n_features_ = X.shape[1]
        self.impurity_decreases_ = np.zeros(self.n_features_)

        prior = float((w * y).sum() / w.sum())
        self.base_score_ = float(np.log(prior / (1.0 - prior)))
        F = np.full(len(y), self.base_score_)

        self.trees_ = []
        self.train_loss_ = [self._loss(y, w, F)]
        for _ in range(self.n_estimators):
            p = _sigmoid(F)
            g = w * (p - y)
            h = w * p * (1.0 - p)
            tree = _fit_gradient_tree(X, g, h, self.max_depth, self.reg_lambda,
                                      self.min_samples_split,
                                      self.impurity_decreases_)
            self.trees_.append(tree)
            F = F + self.learning_rate * tree.leaf_value[tree.apply(X)]
            self.train_loss_.append(self._loss(y, w, F))
        return self

    @staticmethod
    def _loss(y, w, F) -> float:
        p = np.clip(_sigmoid(F), 1e-12, 1.0 - 1e-12)
        ll = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
        return float((w * ll).sum() / w.sum())

    def decision_function(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        F = np.full(len(X), self.base_score_)
        for tree in self.trees_:
            F += self.learning_rate * tree.leaf_value[tree.apply(X)]
        return F

    def predict_proba(self, X) -> np.ndarray:
        p1 = _sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X) -> np.ndarray:
        return (_sigmoid(self.decision_function(X)) >= 0.5).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "params": {
                "n_estimators": self.n_estimators,
                "learning_rate": self.learning_rate,
                "max_depth": self.max_depth,
                "reg_lambda": self.reg_lambda,
                "class_weights": (list(self.class_weights)
                                  if isinstance(self.class_weights, tuple)
                                  else self.class_weights),
                "min_samples_split": self.min_samples_split,
                "seed": self.seed,
            },
            "base_score": self.base_score_,
            "trees": [t.to_dict() for t in self.trees_],
            "impurity_decreases": self.impurity_decreases_.tolist(),
            "n_features": self.n_features_,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GradientBoostedClassifier":
        params = dict(d["params"])
        if isinstance(params.get("class_weights"), list):
            params["class_weights"] = tuple(params["class_weights"])
        model = cls(**params)
        model.base_score_ = d["base_score"]
        model.trees_ = [TreeNodes.from_dict(t) for t in d["trees"]]
        model.impurity_decreases_ = np.asarray(d["impurity_decreases"])
        model.n_features_ = d["n_features"]
        return model
