"""Two-stage stacked ensemble.

Training splits the data into two stratified halves: the first trains a
crowd of deliberately overfit decision trees, each on a bootstrap of the
rows and a with-replacement sample of the column names (deduplicated, and
remembered per tree); the second half is pushed through those trees to
build a meta-feature matrix on which the meta-classifier is trained.  The
meta-classifier therefore never sees a row that any base tree trained on.

Prediction re-samples each incoming row by every base's stored column
names, collects the base outputs into one row of width n_base, and lets
the meta-classifier decide.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bundles import (deserialize_classifier, read_bundle, serialize_classifier,
                      write_bundle)
from .data_model import LabeledDataset, Table
from .errors import ConfigError, DataFormatError
from .learners import (DecisionTreeClassifier, GradientBoostedClassifier,
                       LogisticRegression)

_MAX_BOOTSTRAP_ATTEMPTS = 100


@dataclass(frozen=True)
class MetaSpec:
    """Meta-classifier recipe: boosted trees (optionally class-weighted)
    or an L2 logistic model.

    The boosted meta defaults to depth 3: its input is a wide matrix of
    binary base votes, where deep trees memorize the handful of minority
    rows in the second half instead of generalizing.
    """

    kind: str = "gbt"               # "gbt" | "logistic"
    n_estimators: int = 100
    max_depth: int = 3
    weighted: bool = False
    C: float = 0.1

    def __post_init__(self):
        if self.kind not in ("gbt", "logistic"):
            raise ConfigError(f"unknown meta classifier {self.kind!r}")

    def make(self, seed: int):
        if self.kind == "gbt":
            return GradientBoostedClassifier(
                n_estimators=self.n_estimators, max_depth=self.max_depth,
                class_weights="balanced" if self.weighted else None,
                seed=seed)
        return LogisticRegression(C=self.C)

    def describe(self) -> str:
        if self.kind == "gbt":
            tag = f"gbt({self.n_estimators}"
            return tag + (", weighted)" if self.weighted else ")")
        return f"logistic(C={self.C:g})"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n_estimators": self.n_estimators,
                "max_depth": self.max_depth, "weighted": self.weighted,
                "C": self.C}

    @classmethod
    def from_dict(cls, d: dict) -> "MetaSpec":
        return cls(**d)


@dataclass(frozen=True)
class StackingConfig:
    n_base: int = 500
    col_fraction: float = 0.5
    meta: MetaSpec = field(default_factory=MetaSpec)
    base_max_depth: int | None = None       # unlimited: bases are meant to overfit
    base_min_samples_split: int = 2
    base_output: str = "label"              # "label" | "proba"
    seed: int = 0

    def __post_init__(self):
        if self.n_base < 1:
            raise ConfigError("n_base must be >= 1")
        if not 0.0 < self.col_fraction <= 1.0:
            raise ConfigError("col_fraction must be in (0, 1]")
        if self.base_output not in ("label", "proba"):
            raise ConfigError("base_output must be 'label' or 'proba'")

    def describe(self) -> str:
        return f"stacked: {self.n_base}xtree + {self.meta.describe()}"

    def to_dict(self) -> dict:
        return {"n_base": self.n_base, "col_fraction": self.col_fraction,
                "meta": self.meta.to_dict(), "base_max_depth": self.base_max_depth,
                "base_min_samples_split": self.base_min_samples_split,
                "base_output": self.base_output, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "StackingConfig":
        d = dict(d)
        d["meta"] = MetaSpec.from_dict(d["meta"])
        return cls(**d)


@dataclass
class BaseEstimator:
    tree: DecisionTreeClassifier
    columns: list[str]


@dataclass
class StackedEnsembleModel:
    config: StackingConfig
    columns: list[str]              # training-time feature columns
    bases: list[BaseEstimator]
    meta: object


def _seed_int(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0]
               % (2**31 - 1))


def split_halves(train: LabeledDataset, seed: int
                 ) -> tuple[LabeledDataset, LabeledDataset]:
    """Stratified 50/50 row split with all columns on both sides.

    Odd class counts alternate their leftover row between the halves,
    starting with the first, so a 2-row input still yields one row each.
    """
    if train.n_rows < 2:
        raise DataFormatError("need at least 2 rows to split in half")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    in_first = np.zeros(train.n_rows, dtype=bool)
    extra_to_first = True
    for label in (0, 1):
        members = np.flatnonzero(train.target == label)
        if members.size == 0:
            raise DataFormatError(f"class {label} is absent")
        take = members.size // 2
        if members.size % 2:
            if extra_to_first:
                take += 1
            extra_to_first = not extra_to_first
        picked = rng.permutation(members)[:take]
        in_first[picked] = True
    h1 = train.take_rows(np.flatnonzero(in_first))
    h2 = train.take_rows(np.flatnonzero(~in_first))
    return h1, h2


def _train_one_base(b: int, values: np.ndarray, y: np.ndarray,
                    names: list[str], cfg: StackingConfig) -> BaseEstimator:
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1, b]))
    n, p = values.shape
    for attempt in range(_MAX_BOOTSTRAP_ATTEMPTS):
        rows = rng.integers(0, n, n)
        if 0 < y[rows].sum() < n:
            break
    else:
        raise DataFormatError(
            f"base {b}: could not bootstrap both classes in "
            f"{_MAX_BOOTSTRAP_ATTEMPTS} attempts; dataset too degenerate")
    if cfg.col_fraction >= 1.0:
        # saturation: every base sees every column
        col_positions = list(range(p))
    else:
        draw_count = int(np.ceil(cfg.col_fraction * p))
        draws = rng.integers(0, p, draw_count)
        col_positions = list(dict.fromkeys(int(j) for j in draws))
    tree = DecisionTreeClassifier(
        max_depth=cfg.base_max_depth,
        min_samples_split=cfg.base_min_samples_split,
        seed=_seed_int(cfg.seed, 2, b))
    tree.fit(values[rows][:, col_positions], y[rows])
    return BaseEstimator(tree=tree, columns=[names[j] for j in col_positions])


def train_base_estimators(h1: LabeledDataset, cfg: StackingConfig,
                          threads: int = 1) -> list[BaseEstimator]:
    """Bootstrap rows (resampled until both classes appear) and sample
    column names with replacement per base; train one overfit tree each.

    Per-base random streams derive from (seed, base index), so the result
    is identical for any thread count.
    """
    if h1.n_rows == 0:
        raise DataFormatError("first half is empty")
    if h1.features.missing_mask.any():
        raise DataFormatError("stacking needs complete features; impute first")
    values = np.ascontiguousarray(h1.features.values)
    y = h1.target
    names = h1.features.column_names
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(
                lambda b: _train_one_base(b, values, y, names, cfg),
                range(cfg.n_base)))
    return [_train_one_base(b, values, y, names, cfg)
            for b in range(cfg.n_base)]


def build_meta_features(bases: list[BaseEstimator], t: Table,
                        base_output: str = "label",
                        threads: int = 1) -> np.ndarray:
    """n x n_base matrix; column j holds base j's prediction for every row,
    computed on exactly base j's stored columns in stored order."""
    if t.missing_mask.any():
        raise DataFormatError("meta features need complete input; impute first")
    values = np.ascontiguousarray(t.values)
    positions = [np.array([t.column_position(c) for c in base.columns])
                 for base in bases]

    def one(j: int) -> np.ndarray:
        sub = values[:, positions[j]]
        if base_output == "proba":
            return bases[j].tree.predict_proba(sub)[:, 1]
        return bases[j].tree.predict(sub).astype(np.float64)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cols = list(pool.map(one, range(len(bases))))
    else:
        cols = [one(j) for j in range(len(bases))]
    return np.column_stack(cols) if cols else np.empty((t.n_rows, 0))


def train_stacked(train: LabeledDataset, cfg: StackingConfig,
                  threads: int = 1) -> StackedEnsembleModel:
    """Half-split, base training on one half, meta training on the other."""
    if train.n_rows < 4 or train.target.sum() < 2 or (train.target == 0).sum() < 2:
        raise DataFormatError("stacked training needs >= 4 rows with >= 2 of "
                              "each class")
    h1, h2 = split_halves(train, cfg.seed)
    first = set(h1.features.row_index.tolist())
    second = set(h2.features.row_index.tolist())
    # no-leakage invariant: meta training rows never touched base training
    assert not (first & second)
    assert first | second == set(train.features.row_index.tolist())

    bases = train_base_estimators(h1, cfg, threads=threads)
    meta_x = build_meta_features(bases, h2.features, cfg.base_output, threads)
    meta = cfg.meta.make(seed=_seed_int(cfg.seed, 3))
    meta.fit(meta_x, h2.target)
    return StackedEnsembleModel(config=cfg,
                                columns=list(train.features.column_names),
                                bases=bases, meta=meta)


def predict_stacked(model: StackedEnsembleModel, t: Table,
                    threads: int = 1) -> np.ndarray:
    meta_x = build_meta_features(model.bases, t, model.config.base_output,
                                 threads)
    return model.meta.predict(meta_x)


def save_model(model: StackedEnsembleModel, path) -> None:
    payload = {
        "config": model.config.to_dict(),
        "columns": model.columns,
        "bases": [{"columns": b.columns, "tree": b.tree.to_dict()}
                  for b in model.bases],
        "meta": serialize_classifier(model.meta),
    }
    write_bundle(path, "stacked_ensemble", payload)


def load_model(path) -> StackedEnsembleModel:
    payload = read_bundle(path, "stacked_ensemble")
    return StackedEnsembleModel(
        config=StackingConfig.from_dict(payload["config"]),
        columns=list(payload["columns"]),
        bases=[BaseEstimator(tree=DecisionTreeClassifier.from_dict(b["tree"]),
                             columns=list(b["columns"]))
               for b in payload["bases"]],
        meta=deserialize_classifier(payload["meta"]),
    )
