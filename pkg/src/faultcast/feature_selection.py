"""Recursive feature elimination, plain and cross-validated.

Both variants rank features by repeatedly training a tree-based estimator
and discarding the lowest-importance survivors.  The CV variant scores
every feature count along the elimination path with stratified k-fold
macro F1 and keeps the count that maximizes the mean score.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .data_model import LabeledDataset
from .errors import ConfigError, DataFormatError
from .learners import (DecisionTreeClassifier, GradientBoostedClassifier,
                       RandomForestClassifier)
from .metrics import evaluate_predictions


@dataclass(frozen=True)
class EstimatorSpec:
    """Recipe for the selection estimator (importances + predictions)."""

    kind: str = "gbt"              # "gbt" | "tree" | "forest"
    n_estimators: int = 100
    max_depth: int | None = 3
    learning_rate: float = 0.3

    def __post_init__(self):
        if self.kind not in ("gbt", "tree", "forest"):
            raise ConfigError(f"unknown estimator kind {self.kind!r}")

    def make(self, seed: int = 0):
        if self.kind == "gbt":
            return GradientBoostedClassifier(
                n_estimators=self.n_estimators, max_depth=self.max_depth or 6,
                learning_rate=self.learning_rate, seed=seed)
        if self.kind == "tree":
            return DecisionTreeClassifier(max_depth=self.max_depth, seed=seed)
        return RandomForestClassifier(n_trees=self.n_estimators,
                                      max_depth=self.max_depth, seed=seed)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n_estimators": self.n_estimators,
                "max_depth": self.max_depth, "learning_rate": self.learning_rate}

    @classmethod
    def from_dict(cls, d: dict) -> "EstimatorSpec":
        return cls(**d)


@dataclass
class SelectionResult:
    ranking: dict[str, int]
    selected: list[str]
    cv_scores: dict[int, float] = field(default_factory=dict)
    chosen_k: int = 0

    def to_dict(self) -> dict:
        return {"ranking": self.ranking, "selected": self.selected,
                "cv_scores": {str(k): v for k, v in self.cv_scores.items()},
                "chosen_k": self.chosen_k}


def feature_importances(model, column_names: list[str]) -> dict[str, float]:
    """Total impurity decrease per feature, normalized to sum 1.

    A model that never split (single leaf everywhere) yields all zeros and
    a RuntimeWarning rather than an error.
    """
    raw = np.asarray(model.impurity_decreases_, dtype=np.float64)
    if len(raw) != len(column_names):
        raise DataFormatError(f"model has {len(raw)} features, "
                              f"got {len(column_names)} names")
    total = raw.sum()
    if total <= 0:
        warnings.warn("model contains no splits; importances are all zero",
                      RuntimeWarning)
        return {name: 0.0 for name in column_names}
    return {name: float(v / total) for name, v in zip(column_names, raw)}


def _dense_xy(d: LabeledDataset) -> tuple[np.ndarray, np.ndarray]:
    # estimators need complete matrices; masked cells get the observed mean
    return d.features.filled_values(), d.target


def _drop_lowest(importances: np.ndarray, active: list[int], count: int) -> list[int]:
    order = sorted(range(len(active)), key=lambda i: (importances[i], active[i]))
    doomed = {active[i] for i in order[:count]}
    return [a for a in active if a not in doomed]


def rfe(d: LabeledDataset, spec: EstimatorSpec = EstimatorSpec(),
        keep: int = 10, step: int = 1, seed: int = 0) -> SelectionResult:
    """Eliminate `step` lowest-importance features per round until `keep`
    remain.  Rank 1 marks the survivors; higher ranks were dropped earlier."""
    p = d.features.n_cols
    if not 1 <= keep <= p:
        raise ConfigError(f"keep must be in [1, {p}], got {keep}")
    if step < 1:
        raise ConfigError("step must be >= 1")
    X, y = _dense_xy(d)
    names = d.features.column_names
    active = list(range(p))
    drop_events: list[list[int]] = []
    while len(active) > keep:
        model = spec.make(seed=seed)
        model.fit(X[:, active], y)
        imps = np.asarray(model.impurity_decreases_)
        survivors = _drop_lowest(imps, active, min(step, len(active) - keep))
        drop_events.append([a for a in active if a not in set(survivors)])
        active = survivors
    ranking = {names[j]: 1 for j in active}
    for back, event in enumerate(reversed(drop_events)):
        for j in event:
            ranking[names[j]] = back + 2
    return SelectionResult(ranking=ranking, selected=[names[j] for j in active],
                           chosen_k=keep)


def stratified_kfold(y: np.ndarray, folds: int, seed: int) -> list[np.ndarray]:
    """Deterministic stratified fold assignment; returns test-index arrays."""
    if folds < 2:
        raise ConfigError("folds must be >= 2")
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(y), dtype=np.int64)
    for label in np.unique(y):
        members = rng.permutation(np.flatnonzero(y == label))
        if members.size < folds:
            raise DataFormatError(
                f"class {label} has {members.size} rows; need >= {folds} "
                f"for {folds}-fold stratified CV")
        assignment[members] = np.arange(members.size) % folds
    return [np.flatnonzero(assignment == f) for f in range(folds)]


def _path_ks(p: int, step: int) -> list[int]:
    ks = [p]
    while ks[-1] > 1:
        ks.append(max(1, ks[-1] - step))
    return ks


def rfecv(d: LabeledDataset, spec: EstimatorSpec = EstimatorSpec(),
          folds: int = 5, step: int = 1, seed: int = 0) -> SelectionResult:
    """RFE with the feature count picked by stratified k-fold macro F1.

    Each fold runs its own elimination path, scoring the held-out part at
    every count; the count with the best mean score wins (ties favour the
    smaller count), and one final RFE pass on all rows yields the selected
    set at that count.
    """
    X, y = _dense_xy(d)
    p = d.features.n_cols
    ks = _path_ks(p, step)
    fold_tests = stratified_kfold(y, folds, seed)
    score_sums = {k: 0.0 for k in ks}
    for f, test_idx in enumerate(fold_tests):
        train_mask = np.ones(len(y), dtype=bool)
        train_mask[test_idx] = False
        Xtr, ytr = X[train_mask], y[train_mask]
        Xte, yte = X[test_idx], y[test_idx]
        active = list(range(p))
        model = None
        for k in ks:
            if len(active) > k:
                # the previous scoring fit doubles as the elimination fit
                active = _drop_lowest(np.asarray(model.impurity_decreases_),
                                      active, len(active) - k)
            model = spec.make(seed=_fold_seed(seed, f, k))
            model.fit(Xtr[:, active], ytr)
            rep = evaluate_predictions(yte, model.predict(Xte[:, active]))
            score_sums[k] += rep.macro_f1
    cv_scores = {k: s / folds for k, s in score_sums.items()}
    chosen_k = min((k for k in ks), key=lambda k: (-cv_scores[k], k))
    final = rfe(d, spec, keep=chosen_k, step=step, seed=seed)
    return SelectionResult(ranking=final.ranking, selected=final.selected,
                           cv_scores=cv_scores, chosen_k=chosen_k)


def _fold_seed(seed: int, fold: int, k: int) -> int:
    return int(np.random.SeedSequence([seed, fold, k]).generate_state(1)[0]
               % (2**31 - 1))
