"""End-to-end preprocessing: the fitted object behind `preprocess`.

Fit order follows the measures/histogram treatment: split columns by name
pattern, optionally restrict measures to a previously selected feature
list, engineer derived columns on the raw values, run the banded imputer,
row-drop incomplete histogram rows, join everything back on the row index,
and standardize last.  transform() replays the fitted steps on new data;
rows dropped by the d1/histogram rules drop their labels with them.
"""

from __future__ import annotations

import re

import numpy as np

from .bundles import read_bundle, write_bundle
from .config import PipelineConfig
from .data_model import (LabeledDataset, Table, drop_rows_with_missing,
                         join_on_index)
from .errors import DataFormatError
from .imputation import BandedImputer
from .transforms import FeatureEngineer, Standardizer


class Preprocessor:
    def __init__(self, config: PipelineConfig):
        self.config = config
        self.measure_columns_: list[str] = []
        self.histogram_columns_: list[str] = []
        self.engineer_: FeatureEngineer | None = None
        self.imputer_: BandedImputer | None = None
        self.standardizer_: Standardizer | None = None

    def _split_columns(self, t: Table) -> tuple[list[str], list[str]]:
        pattern = re.compile(self.config.histogram_pattern)
        hist = [c for c in t.column_names if pattern.search(c)]
        meas = [c for c in t.column_names if not pattern.search(c)]
        return meas, hist

    def fit_transform(self, d: LabeledDataset) -> LabeledDataset:
        cfg = self.config
        meas, hist = self._split_columns(d.features)
        if cfg.selected_features is not None:
            missing = [c for c in cfg.selected_features if c not in meas]
            if missing:
                raise DataFormatError(
                    f"selected features not in the measures block: {missing}")
            meas = [c for c in meas if c in set(cfg.selected_features)]
        self.measure_columns_ = meas
        self.histogram_columns_ = hist

        parts = []
        if meas:
            measures = d.features.select_columns(meas)
            self.engineer_ = FeatureEngineer(cfg.engineered_features)
            self.engineer_.fit(measures, d.target)
            measures = self.engineer_.transform(measures)
            self.imputer_ = BandedImputer(
                thresholds=cfg.band_thresholds, d2_spec=cfg.d2_spec,
                d3_spec=cfg.d3_spec, max_iter=cfg.imputer_max_iter,
                tol=cfg.imputer_tol, seed=cfg.seed)
            parts.append(self.imputer_.fit_transform(measures))
        if hist:
            hist_table = d.features.select_columns(hist)
            if cfg.histogram_row_drop:
                hist_table = drop_rows_with_missing(hist_table)
            parts.append(hist_table)
        if not parts:
            raise DataFormatError("no feature columns to preprocess")

        joined = join_on_index(parts)
        if joined.missing_mask.any():
            raise DataFormatError("internal error: missing cells survived "
                                  "preprocessing")
        self.standardizer_ = Standardizer().fit(joined)
        return LabeledDataset(self.standardizer_.transform(joined),
                              _align_target(d, joined))

    def transform_table(self, t: Table) -> Table:
        parts = []
        if self.measure_columns_:
            measures = t.select_columns(self.measure_columns_)
            measures = self.engineer_.transform(measures)
            parts.append(self.imputer_.transform(measures))
        if self.histogram_columns_:
            hist_table = t.select_columns(self.histogram_columns_)
            if self.config.histogram_row_drop:
                hist_table = drop_rows_with_missing(hist_table)
            parts.append(hist_table)
        joined = join_on_index(parts)
        return self.standardizer_.transform(joined)

    def transform(self, d: LabeledDataset) -> LabeledDataset:
        out = self.transform_table(d.features)
        return LabeledDataset(out, _align_target(d, out))

    @property
    def band_assignment(self) -> dict[str, str] | None:
        if self.imputer_ is None or self.imputer_.partition_ is None:
            return None
        return self.imputer_.partition_.to_dict()

    def to_payload(self) -> dict:
        return {
            "config": self.config.echo(),
            "measure_columns": self.measure_columns_,
            "histogram_columns": self.histogram_columns_,
            "engineer": self.engineer_.to_dict() if self.engineer_ else None,
            "imputer": self.imputer_.to_dict() if self.imputer_ else None,
            "standardizer": self.standardizer_.to_dict(),
        }

    def save(self, path) -> None:
        write_bundle(path, "preprocessor", self.to_payload())

    @classmethod
    def load(cls, path) -> "Preprocessor":
        payload = read_bundle(path, "preprocessor")
        # the echo spells out every default and validates like a user config
        pre = cls(PipelineConfig.from_dict(payload["config"]))
        pre.measure_columns_ = list(payload["measure_columns"])
        pre.histogram_columns_ = list(payload["histogram_columns"])
        if payload["engineer"]:
            pre.engineer_ = FeatureEngineer.from_dict(payload["engineer"])
        if payload["imputer"]:
            pre.imputer_ = BandedImputer.from_dict(payload["imputer"])
        pre.standardizer_ = Standardizer.from_dict(payload["standardizer"])
        return pre


def _align_target(d: LabeledDataset, result: Table) -> np.ndarray:
    by_label = dict(zip(d.features.row_index.tolist(), d.target.tolist()))
    return np.array([by_label[lab] for lab in result.row_index.tolist()],
                    dtype=np.int64)
