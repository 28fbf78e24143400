"""Standardization, hand-built feature engineering, and correlation checks.

The engineered-feature kinds mirror how the useful sensor channels combine:
element-wise products, differences, and "value minus a class-conditional
percentile" with the percentile frozen at fit time.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data_model import Table
from .errors import ConfigError, DataFormatError


class Standardizer:
    """Per-column (x - mean) / std with population std, fit-time statistics
    only.  Zero-variance columns transform to all zeros."""

    def __init__(self):
        self.columns_: list[str] | None = None
        self.mean_: np.ndarray | None = None
        self.std_: np.ndarray | None = None

    def fit(self, t: Table) -> "Standardizer":
        if t.missing_mask.any():
            raise DataFormatError("standardizer must be fit on a complete table")
        self.columns_ = list(t.column_names)
        self.mean_ = t.values.mean(axis=0)
        self.std_ = t.values.std(axis=0)   # population std
        return self

    def transform(self, t: Table) -> Table:
        stats = dict(zip(self.columns_, zip(self.mean_, self.std_)))
        out = np.empty_like(t.values)
        for j, name in enumerate(t.column_names):
            if name not in stats:
                raise DataFormatError(f"column {name!r} was not seen at fit time")
            mean, std = stats[name]
            if std > 0:
                out[:, j] = (t.values[:, j] - mean) / std
            else:
                out[:, j] = 0.0
        return Table(t.column_names, t.row_index, out, t.missing_mask)

    def to_dict(self) -> dict:
        return {"columns": self.columns_, "mean": self.mean_.tolist(),
                "std": self.std_.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        s = cls()
        s.columns_ = list(d["columns"])
        s.mean_ = np.asarray(d["mean"], dtype=np.float64)
        s.std_ = np.asarray(d["std"], dtype=np.float64)
        return s


def fit_standardizer(t: Table) -> Standardizer:
    return Standardizer().fit(t)


@dataclass
class EngineeredFeatureSpec:
    """One derived column: product or difference of two columns, or a column
    minus a fitted class-conditional percentile.

    ``fitted_value`` is the frozen percentile; it is set during fit and
    reused verbatim on new data.
    """

    kind: str                      # "product" | "difference" | "minus_class_percentile"
    inputs: tuple[str, ...]
    class_label: int | None = None
    q: float | None = None
    fitted_value: float | None = None

    KINDS = ("product", "difference", "minus_class_percentile")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigError(f"unknown engineered-feature kind {self.kind!r}")
        self.inputs = tuple(self.inputs)
        if self.kind == "minus_class_percentile":
            if len(self.inputs) != 1:
                raise ConfigError("minus_class_percentile takes exactly one input")
            if self.class_label not in (0, 1):
                raise ConfigError("minus_class_percentile needs class_label 0 or 1")
            if self.q is None or not 0.0 <= self.q <= 1.0:
                raise ConfigError("minus_class_percentile needs q in [0,1]")
        elif len(self.inputs) != 2:
            raise ConfigError(f"{self.kind} takes exactly two inputs")

    @property
    def output_name(self) -> str:
        if self.kind == "product":
            return f"{self.inputs[0]}_x_{self.inputs[1]}"
        if self.kind == "difference":
            return f"{self.inputs[0]}_minus_{self.inputs[1]}"
        return f"{self.inputs[0]}_minus_p{self.q * 100:g}c{self.class_label}"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "inputs": list(self.inputs),
                "class_label": self.class_label, "q": self.q,
                "fitted_value": self.fitted_value}

    @classmethod
    def from_dict(cls, d: dict) -> "EngineeredFeatureSpec":
        return cls(kind=d["kind"], inputs=tuple(d["inputs"]),
                   class_label=d.get("class_label"), q=d.get("q"),
                   fitted_value=d.get("fitted_value"))


class FeatureEngineer:
    """Fits percentile-based specs on training rows, then appends one column
    per spec to any table.  Existing columns are never altered or reordered;
    an output cell is missing whenever any of its inputs is missing."""

    def __init__(self, specs: list[EngineeredFeatureSpec]):
        self.specs = list(specs)

    def fit(self, t: Table, labels=None) -> "FeatureEngineer":
        for spec in self.specs:
            for name in spec.inputs:
                t.column_position(name)   # raises on unknown input
            if spec.kind != "minus_class_percentile":
                continue
            if labels is None:
                raise DataFormatError(
                    f"{spec.output_name}: fitting requires class labels")
            labels = np.asarray(labels)
            col, mask = t.column(spec.inputs[0])
            pick = (labels == spec.class_label) & ~mask
            if not pick.any():
                raise DataFormatError(
                    f"{spec.output_name}: no observed rows of class "
                    f"{spec.class_label} to take the percentile over")
            spec.fitted_value = float(np.quantile(col[pick], spec.q,
                                                  method="linear"))
        return self

    def transform(self, t: Table) -> Table:
        if not self.specs:
            return t
        cols, masks, names = [], [], []
        for spec in self.specs:
            if spec.kind == "minus_class_percentile":
                if spec.fitted_value is None:
                    raise DataFormatError(
                        f"{spec.output_name}: percentile not fitted yet")
                a, ma = t.column(spec.inputs[0])
                values = a - spec.fitted_value
                mask = ma.copy()
            else:
                a, ma = t.column(spec.inputs[0])
                b, mb = t.column(spec.inputs[1])
                mask = ma | mb
                with np.errstate(invalid="ignore"):
                    values = a * b if spec.kind == "product" else a - b
            names.append(spec.output_name)
            cols.append(values)
            masks.append(mask)
        return t.with_columns(names, np.column_stack(cols), np.column_stack(masks))

    def to_dict(self) -> dict:
        return {"specs": [s.to_dict() for s in self.specs]}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureEngineer":
        return cls([EngineeredFeatureSpec.from_dict(s) for s in d["specs"]])


def engineer_features(t: Table, labels, specs: list[EngineeredFeatureSpec]) -> Table:
    """Fit-and-apply convenience for a fresh list of specs."""
    return FeatureEngineer(specs).fit(t, labels).transform(t)


def pearson(x, y) -> float:
    """Pearson correlation; 0.0 with a warning when either side is constant."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise DataFormatError(f"length mismatch: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise DataFormatError("need at least 2 points")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc * xc).sum() * (yc * yc).sum())
    if denom == 0:
        warnings.warn("pearson undefined for zero-variance input; returning 0.0",
                      RuntimeWarning)
        return 0.0
    return float(np.clip((xc * yc).sum() / denom, -1.0, 1.0))


def correlation_matrix(t: Table) -> np.ndarray:
    """Symmetric PCC matrix over pairwise-complete rows; diagonal is 1."""
    p = t.n_cols
    out = np.eye(p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for i in range(p):
            for j in range(i + 1, p):
                both = ~(t.missing_mask[:, i] | t.missing_mask[:, j])
                if both.sum() < 2:
                    r = 0.0
                else:
                    r = pearson(t.values[both, i], t.values[both, j])
                out[i, j] = out[j, i] = r
    return out
