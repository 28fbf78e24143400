"""Train one library model on pipeline-exported CSVs and report it.

Model families mirror the usual suspects for this problem: gradient-boosted
trees (xgboost when importable, otherwise scikit-learn's histogram GBDT,
with the library recorded in the report), random forest, AdaBoost, and
CatBoost (reported unavailable when the library is absent).  Inputs must be
complete; preprocessing belongs to the primary pipeline, so this harness
isolates the model comparison.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .reporting import (build_report, classification_metrics, file_digest)

FAMILIES = ("gradient_boosted", "random_forest", "adaboost", "catboost")

NA_TOKENS = ["na", "NA", "Na", "nan", "NaN", ""]


class HarnessError(ValueError):
    pass


class LibraryUnavailable(HarnessError):
    pass


@dataclass(frozen=True)
class BaselineSpec:
    family: str
    weighted: bool = False
    n_estimators: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise HarnessError(f"unknown model family {self.family!r}; "
                               f"expected one of {FAMILIES}")

    @classmethod
    def from_dict(cls, d: dict) -> "BaselineSpec":
        unknown = set(d) - {"family", "weighted", "n_estimators", "seed"}
        if unknown:
            raise HarnessError(f"unknown spec keys: {sorted(unknown)}")
        if "family" not in d:
            raise HarnessError("spec needs a 'family' key")
        return cls(family=d["family"], weighted=bool(d.get("weighted", False)),
                   n_estimators=d.get("n_estimators"),
                   seed=int(d.get("seed", 0)))

    def to_dict(self) -> dict:
        return {"family": self.family, "weighted": self.weighted,
                "n_estimators": self.n_estimators, "seed": self.seed}


def load_split(path, target_column: str):
    """Read a pipeline-exported CSV: optional leading id column, numeric
    features, and a 0/1 target column.  Missing values are a caller error."""
    df = pd.read_csv(path, na_values=NA_TOKENS, keep_default_na=False)
    if target_column not in df.columns:
        raise HarnessError(f"{path}: target column {target_column!r} missing")
    if df.isna().any().any():
        bad = df.columns[df.isna().any()].tolist()
        raise HarnessError(f"{path}: missing values in {bad[:5]}; this "
                           "harness expects preprocessed, complete data")
    y = df[target_column].astype(int).to_numpy()
    if not set(np.unique(y)) <= {0, 1}:
        raise HarnessError(f"{path}: target must be 0/1")
    drop = [target_column] + (["id"] if "id" in df.columns else [])
    X = df.drop(columns=drop)
    return X.to_numpy(dtype=float), y, X.columns.tolist()


def _gradient_boosted(spec: BaselineSpec, n0: int, n1: int):
    try:
        from xgboost import XGBClassifier
        params = {"random_state": spec.seed, "n_jobs": 1}
        if spec.n_estimators:
            params["n_estimators"] = spec.n_estimators
        if spec.weighted:
            params["scale_pos_weight"] = n0 / max(n1, 1)
        return XGBClassifier(**params), "xgboost"
    except ImportError:
        from sklearn.ensemble import HistGradientBoostingClassifier
        params = {"random_state": spec.seed}
        if spec.n_estimators:
            params["max_iter"] = spec.n_estimators
        if spec.weighted:
            params["class_weight"] = "balanced"
        return HistGradientBoostingClassifier(**params), "sklearn-histgb"


def _random_forest(spec: BaselineSpec):
    from sklearn.ensemble import RandomForestClassifier
    params = {"random_state": spec.seed, "n_jobs": 1}
    if spec.n_estimators:
        params["n_estimators"] = spec.n_estimators
    if spec.weighted:
        params["class_weight"] = "balanced"
    return RandomForestClassifier(**params), "sklearn-rf"


def _adaboost(spec: BaselineSpec):
    from sklearn.ensemble import AdaBoostClassifier
    params = {"random_state": spec.seed}
    if spec.n_estimators:
        params["n_estimators"] = spec.n_estimators
    return AdaBoostClassifier(**params), "sklearn-adaboost"


def _catboost(spec: BaselineSpec):
    try:
        from catboost import CatBoostClassifier
    except ImportError:
        raise LibraryUnavailable(
            "catboost is not installed; skipping the categorical-boosting "
            "family") from None
    params = {"random_seed": spec.seed, "verbose": False}
    if spec.n_estimators:
        params["n_estimators"] = spec.n_estimators
    if spec.weighted:
        params["auto_class_weights"] = "Balanced"
    return CatBoostClassifier(**params), "catboost"


def run_baseline(data_path, split_path, spec: BaselineSpec,
                 target_column: str = "class") -> dict:
    """Fit the spec'd library model on --data, score on --split, and return
    a RunReport dict in the shared schema."""
    started = time.perf_counter()
    X_train, y_train, cols_train = load_split(data_path, target_column)
    X_test, y_test, cols_test = load_split(split_path, target_column)
    if cols_train != cols_test:
        raise HarnessError("train and split CSVs disagree on feature columns")
    if len(np.unique(y_train)) < 2:
        raise HarnessError("training target has a single class")

    n1 = int(y_train.sum())
    n0 = len(y_train) - n1
    sample_weight = None
    if spec.family == "gradient_boosted":
        model, library = _gradient_boosted(spec, n0, n1)
    elif spec.family == "random_forest":
        model, library = _random_forest(spec)
    elif spec.family == "adaboost":
        model, library = _adaboost(spec)
        if spec.weighted:
            # AdaBoost has no class_weight; balance via sample weights
            w1 = len(y_train) / (2.0 * max(n1, 1))
            w0 = len(y_train) / (2.0 * max(n0, 1))
            sample_weight = np.where(y_train == 1, w1, w0)
    else:
        model, library = _catboost(spec)

    if sample_weight is not None:
        model.fit(X_train, y_train, sample_weight=sample_weight)
    else:
        model.fit(X_train, y_train)
    y_pred = np.asarray(model.predict(X_test), dtype=np.int64)

    metrics = classification_metrics(y_test, y_pred)
    n_est = spec.n_estimators if spec.n_estimators else "default"
    tag = "weighted" if spec.weighted else "unweighted"
    config = {"spec": spec.to_dict(), "library": library,
              "target_column": target_column}
    return build_report(
        model=f"{library}({n_est}, {tag})",
        seed=spec.seed,
        config=config,
        metrics=metrics,
        timing_seconds=round(time.perf_counter() - started, 3),
        data_digest=file_digest(data_path) + file_digest(split_path))
