"""Missingness-banded imputation.

Columns are split by missing fraction into three bands with different
treatments: nearly-complete columns (d1) keep only complete rows, moderately
missing columns (d2) go through an iterative imputer with an extra-trees
regressor, heavily missing columns (d3) through the same imputer with a
ridge regressor, and columns beyond the top threshold are discarded.

The iterative imputer is the chained-equations loop: mean-fill, then
round-robin regressions of each incomplete column on all the others until
the imputed cells stop moving.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data_model import (ColumnProfile, Table, drop_rows_with_missing,
                         join_on_index, observed_column_means, profile_columns)
from .errors import ConfigError, DataFormatError
from .learners import ExtraTreesRegressor, RidgeRegression

log = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = (0.05, 0.30, 0.75)


@dataclass(frozen=True)
class RegressorSpec:
    """Which estimator the iterative imputer refits per column."""

    kind: str                       # "extra_trees" | "ridge"
    n_trees: int = 50
    max_depth: int | None = 12      # full-depth trees are overkill for imputation
    min_samples_split: int = 20
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in ("extra_trees", "ridge"):
            raise ConfigError(f"unknown regressor spec {self.kind!r}")

    def make(self, seed: int):
        if self.kind == "extra_trees":
            return ExtraTreesRegressor(n_trees=self.n_trees,
                                       max_depth=self.max_depth,
                                       min_samples_split=self.min_samples_split,
                                       seed=seed)
        return RidgeRegression(alpha=self.alpha)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n_trees": self.n_trees,
                "max_depth": self.max_depth,
                "min_samples_split": self.min_samples_split, "alpha": self.alpha}

    @classmethod
    def from_dict(cls, d: dict) -> "RegressorSpec":
        return cls(**d)

    def _restore_model(self, d: dict):
        model = ExtraTreesRegressor if self.kind == "extra_trees" else RidgeRegression
        return model.from_dict(d)


@dataclass
class MissingnessPartition:
    """Assignment of columns to bands by missing fraction.

    Band rule: fraction < t1 -> d1; [t1, t2) -> d2; [t2, t3] -> d3;
    above t3 -> dropped.  The boundary conventions (0.05 lands in d2,
    0.75 lands in d3) are fixed and tested.
    """

    d1: list[str] = field(default_factory=list)
    d2: list[str] = field(default_factory=list)
    d3: list[str] = field(default_factory=list)
    dropped: list[str] = field(default_factory=list)
    thresholds: tuple[float, float, float] = DEFAULT_THRESHOLDS

    def band_of(self, name: str) -> str:
        for band in ("d1", "d2", "d3", "dropped"):
            if name in getattr(self, band):
                return band
        raise KeyError(f"column {name!r} not in partition")

    def to_dict(self) -> dict:
        mapping = {}
        for band in ("d1", "d2", "d3", "dropped"):
            for name in getattr(self, band):
                mapping[name] = band
        return mapping

    def to_state(self) -> dict:
        return {"d1": self.d1, "d2": self.d2, "d3": self.d3,
                "dropped": self.dropped, "thresholds": list(self.thresholds)}

    @classmethod
    def from_state(cls, d: dict) -> "MissingnessPartition":
        return cls(d1=list(d["d1"]), d2=list(d["d2"]), d3=list(d["d3"]),
                   dropped=list(d["dropped"]),
                   thresholds=tuple(d["thresholds"]))


def partition_by_missingness(profiles: list[ColumnProfile],
                             thresholds=DEFAULT_THRESHOLDS) -> MissingnessPartition:
    t1, t2, t3 = thresholds
    if not 0.0 < t1 < t2 < t3 < 1.0:
        raise ConfigError(f"thresholds must satisfy 0 < t1 < t2 < t3 < 1, "
                          f"got {thresholds}")
    part = MissingnessPartition(thresholds=(t1, t2, t3))
    for prof in profiles:
        f = prof.missing_fraction
        if f < t1:
            part.d1.append(prof.name)
        elif f < t2:
            part.d2.append(prof.name)
        elif f <= t3:
            part.d3.append(prof.name)
        else:
            part.dropped.append(prof.name)
    return part


class IterativeImputer:
    """Chained-equations imputer with a pluggable per-column regressor.

    fit(): mean-fill, then sweep the incomplete columns in ascending
    original missing fraction, regressing each on all other columns over
    the rows where it was observed and overwriting its missing cells with
    predictions.  Sweeps repeat until the largest std-scaled change of any
    imputed cell is <= tol, or max_iter sweeps.  Every sweep's fitted
    regressors are kept, in order.

    transform(): mean-fill with fit-time means, then replay the stored
    sweeps (frozen models, never refit).  Replaying the whole sequence
    rather than just the last sweep is what makes transform on the fit
    table reproduce the converged fit values; a single frozen pass cannot
    move a row with several missing cells all the way to the fixpoint.
    Complete input passes through untouched.
    """

    def __init__(self, spec: RegressorSpec, max_iter: int = 10,
                 tol: float = 1e-3, seed: int = 0):
        if max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        self.spec = spec
        self.max_iter = max_iter
        self.tol = tol
        self.seed = seed
        self.columns_: list[str] | None = None
        self.column_order_: list[str] = []
        self.initial_fill_: np.ndarray | None = None
        self.scale_: np.ndarray | None = None
        self.sweeps_: list[dict[str, object]] = []
        self.sweep_changes_: list[float] = []
        self.n_sweeps_: int = 0

    def fit_transform(self, t: Table) -> Table:
        fractions = t.missing_fractions()
        if (fractions >= 1.0).any():
            bad = [n for n, f in zip(t.column_names, fractions) if f >= 1.0]
            raise DataFormatError(f"columns with no observed values: {bad}")
        self.columns_ = list(t.column_names)
        self.initial_fill_ = observed_column_means(t)
        observed = ~t.missing_mask
        stds = np.array([t.values[observed[:, j], j].std() for j in range(t.n_cols)])
        self.scale_ = np.where(stds > 0, stds, 1.0)

        targets = np.flatnonzero(fractions > 0)
        # ascending missingness: impute the easiest columns first
        targets = targets[np.argsort(fractions[targets], kind="stable")]
        self.column_order_ = [t.column_names[j] for j in targets]
        self.sweeps_ = []
        self.sweep_changes_ = []
        self.n_sweeps_ = 0
        if len(targets) == 0:
            return t
        if t.n_cols < 2:
            raise DataFormatError("iterative imputation needs at least 2 columns")

        filled = t.filled_values(self.initial_fill_)
        mask = t.missing_mask
        others = {j: np.array([k for k in range(t.n_cols) if k != j])
                  for j in targets}
        for sweep in range(self.max_iter):
            worst = 0.0
            sweep_models = {}
            for j in targets:
                rows_obs = observed[:, j]
                rows_mis = mask[:, j]
                # the per-column stream is sweep-independent so successive
                # sweeps differ only through the data, letting tol converge
                model = self.spec.make(seed=_derived_seed(self.seed, 0, int(j)))
                model.fit(filled[np.ix_(rows_obs, others[j])], filled[rows_obs, j])
                sweep_models[t.column_names[j]] = model
                pred = model.predict(filled[np.ix_(rows_mis, others[j])])
                delta = np.abs(pred - filled[rows_mis, j]).max() if len(pred) else 0.0
                worst = max(worst, float(delta) / self.scale_[j])
                filled[rows_mis, j] = pred
            self.sweeps_.append(sweep_models)
            self.sweep_changes_.append(worst)
            self.n_sweeps_ = sweep + 1
            if worst <= self.tol:
                break
        return Table(t.column_names, t.row_index, filled,
                     np.zeros_like(mask))

    def fit(self, t: Table) -> "IterativeImputer":
        self.fit_transform(t)
        return self

    def transform(self, t: Table) -> Table:
        missing_cols = [c for c in self.columns_ if c not in t.column_names]
        if missing_cols:
            raise DataFormatError(f"table lacks fitted columns {missing_cols}")
        if not t.missing_mask.any():
            return t
        sub = t.select_columns(self.columns_)
        filled = sub.filled_values(self.initial_fill_)
        mask = sub.missing_mask
        for sweep_models in self.sweeps_:
            for name in self.column_order_:
                j = sub.column_position(name)
                rows_mis = np.flatnonzero(mask[:, j])
                if rows_mis.size == 0:
                    continue
                other = np.array([k for k in range(sub.n_cols) if k != j])
                filled[rows_mis, j] = sweep_models[name].predict(
                    filled[np.ix_(rows_mis, other)])
        if t.column_names == self.columns_:
            return Table(t.column_names, t.row_index, filled,
                         np.zeros_like(mask))
        # carry any extra columns through untouched
        out_vals = np.array(t.values)
        out_mask = np.array(t.missing_mask)
        for j, name in enumerate(self.columns_):
            dst = t.column_position(name)
            out_vals[:, dst] = filled[:, j]
            out_mask[:, dst] = False
        return Table(t.column_names, t.row_index, out_vals, out_mask)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "max_iter": self.max_iter,
            "tol": self.tol,
            "seed": self.seed,
            "columns": self.columns_,
            "column_order": self.column_order_,
            "initial_fill": self.initial_fill_.tolist(),
            "scale": self.scale_.tolist(),
            "sweeps": [{name: model.to_dict() for name, model in sweep.items()}
                       for sweep in self.sweeps_],
            "sweep_changes": self.sweep_changes_,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IterativeImputer":
        spec = RegressorSpec.from_dict(d["spec"])
        imp = cls(spec, max_iter=d["max_iter"], tol=d["tol"], seed=d["seed"])
        imp.columns_ = list(d["columns"])
        imp.column_order_ = list(d["column_order"])
        imp.initial_fill_ = np.asarray(d["initial_fill"], dtype=np.float64)
        imp.scale_ = np.asarray(d["scale"], dtype=np.float64)
        imp.sweeps_ = [{name: spec._restore_model(m) for name, m in sweep.items()}
                       for sweep in d["sweeps"]]
        imp.sweep_changes_ = list(d["sweep_changes"])
        imp.n_sweeps_ = len(imp.sweep_changes_)
        return imp


def _derived_seed(seed: int, sweep: int, col: int) -> int:
    return int(np.random.SeedSequence([seed, sweep, col]).generate_state(1)[0]
               % (2**31 - 1))


class MeanFiller:
    """Mean imputation; the banded pipeline falls back to this for a band
    with a single column, where chained equations have nothing to regress on."""

    def __init__(self):
        self.columns_: list[str] | None = None
        self.initial_fill_: np.ndarray | None = None

    def fit_transform(self, t: Table) -> Table:
        fractions = t.missing_fractions()
        if (fractions >= 1.0).any():
            bad = [n for n, f in zip(t.column_names, fractions) if f >= 1.0]
            raise DataFormatError(f"columns with no observed values: {bad}")
        self.columns_ = list(t.column_names)
        self.initial_fill_ = observed_column_means(t)
        return self.transform(t)

    def transform(self, t: Table) -> Table:
        sub = t.select_columns(self.columns_)
        filled = sub.filled_values(self.initial_fill_)
        return Table(sub.column_names, sub.row_index, filled,
                     np.zeros_like(sub.missing_mask))

    def to_dict(self) -> dict:
        return {"columns": self.columns_, "initial_fill": self.initial_fill_.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "MeanFiller":
        m = cls()
        m.columns_ = list(d["columns"])
        m.initial_fill_ = np.asarray(d["initial_fill"], dtype=np.float64)
        return m


def fit_iterative_imputer(t: Table, spec: RegressorSpec, max_iter: int = 10,
                          tol: float = 1e-3, seed: int = 0) -> IterativeImputer:
    return IterativeImputer(spec, max_iter=max_iter, tol=tol, seed=seed).fit(t)


def apply_imputer(imputer: IterativeImputer, t: Table) -> Table:
    return imputer.transform(t)


class BandedImputer:
    """The full measures-side treatment: band split, per-band imputation,
    and index-join recombination.

    fit_transform() drops rows with a missing d1 cell (their labels are in
    ``fit_dropped_labels_``), imputes d2/d3, removes dropped-band columns,
    and joins the pieces back on the row index.  transform() repeats the
    same steps on new data with the fitted models; test rows missing a d1
    cell are likewise dropped and reported via ``last_dropped_labels_``.
    """

    def __init__(self, thresholds=DEFAULT_THRESHOLDS,
                 d2_spec: RegressorSpec | None = None,
                 d3_spec: RegressorSpec | None = None,
                 max_iter: int = 10, tol: float = 1e-3, seed: int = 0):
        self.thresholds = tuple(thresholds)
        self.d2_spec = d2_spec or RegressorSpec("extra_trees")
        self.d3_spec = d3_spec or RegressorSpec("ridge")
        if self.d2_spec.kind != "extra_trees" or self.d3_spec.kind != "ridge":
            log.info("non-default band specs: d2=%s d3=%s",
                     self.d2_spec.kind, self.d3_spec.kind)
        self.max_iter = max_iter
        self.tol = tol
        self.seed = seed
        self.partition_: MissingnessPartition | None = None
        self.d2_imputer_: IterativeImputer | None = None
        self.d3_imputer_: IterativeImputer | None = None
        self.fit_dropped_labels_: list[int] = []
        self.last_dropped_labels_: list[int] = []

    def fit_transform(self, t: Table) -> Table:
        self.partition_ = partition_by_missingness(profile_columns(t),
                                                   self.thresholds)
        if self.partition_.dropped:
            log.info("discarding %d columns above the %.0f%% missingness cap",
                     len(self.partition_.dropped), self.thresholds[2] * 100)
        parts = []
        if self.partition_.d1:
            d1 = drop_rows_with_missing(t.select_columns(self.partition_.d1))
            kept = set(d1.row_index.tolist())
            self.fit_dropped_labels_ = [lab for lab in t.row_index.tolist()
                                        if lab not in kept]
            parts.append(d1)
        else:
            self.fit_dropped_labels_ = []
        if self.partition_.d2:
            self.d2_imputer_ = self._band_imputer(self.partition_.d2,
                                                  self.d2_spec, 2)
            parts.append(self.d2_imputer_.fit_transform(
                t.select_columns(self.partition_.d2)))
        if self.partition_.d3:
            self.d3_imputer_ = self._band_imputer(self.partition_.d3,
                                                  self.d3_spec, 3)
            parts.append(self.d3_imputer_.fit_transform(
                t.select_columns(self.partition_.d3)))
        if not parts:
            raise DataFormatError("no columns survive the missingness cap")
        return join_on_index(parts)

    def _band_imputer(self, band: list[str], spec: RegressorSpec, tag: int):
        if len(band) < 2:
            log.info("band d%d has a single column %r; using mean fill",
                     tag, band[0])
            return MeanFiller()
        return IterativeImputer(spec, self.max_iter, self.tol,
                                seed=_derived_seed(self.seed, 0, tag))

    def transform(self, t: Table) -> Table:
        if self.partition_ is None:
            raise DataFormatError("BandedImputer has not been fit")
        parts = []
        if self.partition_.d1:
            d1 = drop_rows_with_missing(t.select_columns(self.partition_.d1))
            kept = set(d1.row_index.tolist())
            self.last_dropped_labels_ = [lab for lab in t.row_index.tolist()
                                         if lab not in kept]
            if self.last_dropped_labels_:
                log.info("dropped %d rows with missing d1 cells",
                         len(self.last_dropped_labels_))
            parts.append(d1)
        else:
            self.last_dropped_labels_ = []
        if self.partition_.d2:
            parts.append(self.d2_imputer_.transform(
                t.select_columns(self.partition_.d2)))
        if self.partition_.d3:
            parts.append(self.d3_imputer_.transform(
                t.select_columns(self.partition_.d3)))
        return join_on_index(parts)

    def to_dict(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "d2_spec": self.d2_spec.to_dict(),
            "d3_spec": self.d3_spec.to_dict(),
            "max_iter": self.max_iter,
            "tol": self.tol,
            "seed": self.seed,
            "partition": self.partition_.to_state(),
            "d2_imputer": _pack_band_imputer(self.d2_imputer_),
            "d3_imputer": _pack_band_imputer(self.d3_imputer_),
            "fit_dropped_labels": self.fit_dropped_labels_,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BandedImputer":
        imp = cls(thresholds=tuple(d["thresholds"]),
                  d2_spec=RegressorSpec.from_dict(d["d2_spec"]),
                  d3_spec=RegressorSpec.from_dict(d["d3_spec"]),
                  max_iter=d["max_iter"], tol=d["tol"], seed=d["seed"])
        imp.partition_ = MissingnessPartition.from_state(d["partition"])
        imp.d2_imputer_ = _unpack_band_imputer(d["d2_imputer"])
        imp.d3_imputer_ = _unpack_band_imputer(d["d3_imputer"])
        imp.fit_dropped_labels_ = list(d["fit_dropped_labels"])
        return imp


def _pack_band_imputer(imputer) -> dict | None:
    if imputer is None:
        return None
    kind = "mean" if isinstance(imputer, MeanFiller) else "iterative"
    return {"kind": kind, "state": imputer.to_dict()}


def _unpack_band_imputer(d: dict | None):
    if d is None:
        return None
    cls = MeanFiller if d["kind"] == "mean" else IterativeImputer
    return cls.from_dict(d["state"])


def impute_measures_pipeline(measures: Table, thresholds=DEFAULT_THRESHOLDS,
                             d2_spec: RegressorSpec | None = None,
                             d3_spec: RegressorSpec | None = None,
                             max_iter: int = 10, tol: float = 1e-3,
                             seed: int = 0) -> tuple[Table, BandedImputer]:
    """One-shot banded imputation; returns the result and the fitted state."""
    imputer = BandedImputer(thresholds, d2_spec, d3_spec, max_iter, tol, seed)
    return imputer.fit_transform(measures), imputer
