"""Pipeline configuration: one JSON file drives every subcommand.

Validation is strict and happens before any work starts: unknown keys at
any level are rejected, as are malformed thresholds or model specs.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .data_model import DEFAULT_NA_TOKENS
from .errors import ConfigError
from .feature_selection import EstimatorSpec
from .imputation import DEFAULT_THRESHOLDS, RegressorSpec
from .stacking import MetaSpec, StackingConfig
from .transforms import EngineeredFeatureSpec


def _check_keys(section: str, d: dict, allowed: set[str]) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {section}: {sorted(unknown)}")


@dataclass
class ModelConfig:
    """Either the stacked ensemble or one of the single learners."""

    type: str = "stacked"           # stacked | tree | gbt | forest | logistic
    params: dict = field(default_factory=dict)

    _ALLOWED = {
        "stacked": {"n_base", "col_fraction", "meta", "base_max_depth",
                    "base_min_samples_split", "base_output"},
        "tree": {"max_depth", "min_samples_split", "min_impurity_decrease"},
        "gbt": {"n_estimators", "learning_rate", "max_depth", "reg_lambda",
                "weighted", "min_samples_split"},
        "forest": {"n_trees", "max_depth", "min_samples_split"},
        "logistic": {"C", "tol", "max_iter"},
    }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        mtype = d.pop("type", "stacked")
        if mtype not in cls._ALLOWED:
            raise ConfigError(f"unknown model type {mtype!r}")
        _check_keys(f"model ({mtype})", d, cls._ALLOWED[mtype])
        if mtype == "stacked" and "meta" in d:
            _check_keys("model.meta", d["meta"],
                        {"kind", "n_estimators", "max_depth", "weighted", "C"})
        return cls(type=mtype, params=d)

    def stacking_config(self, seed: int) -> StackingConfig:
        params = dict(self.params)
        meta = MetaSpec.from_dict(params.pop("meta")) if "meta" in params \
            else MetaSpec()
        return StackingConfig(meta=meta, seed=seed, **params)

    def describe(self, seed: int) -> str:
        if self.type == "stacked":
            return self.stacking_config(seed).describe()
        inner = ", ".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.type}({inner})"

    def to_dict(self) -> dict:
        return {"type": self.type, **self.params}


@dataclass
class PipelineConfig:
    na_tokens: set[str] = field(default_factory=lambda: set(DEFAULT_NA_TOKENS))
    target_column: str = "class"
    id_column: str | None = "id"     # used when present; None disables
    histogram_pattern: str = r"_histogram_bin\d+$"
    histogram_row_drop: bool = True
    band_thresholds: tuple[float, float, float] = DEFAULT_THRESHOLDS
    imputer_max_iter: int = 10
    imputer_tol: float = 1e-3
    d2_spec: RegressorSpec = field(default_factory=lambda: RegressorSpec("extra_trees"))
    d3_spec: RegressorSpec = field(default_factory=lambda: RegressorSpec("ridge"))
    selected_features: list[str] | None = None
    engineered_features: list[EngineeredFeatureSpec] = field(default_factory=list)
    selection_estimator: EstimatorSpec = field(default_factory=EstimatorSpec)
    selection_folds: int = 5
    selection_step: int = 1
    selection_keep: int = 10
    model: ModelConfig = field(default_factory=ModelConfig)
    seed: int = 0
    threads: int = 1

    _TOP_KEYS = {"na_tokens", "target_column", "id_column", "histogram_pattern",
                 "histogram_row_drop", "bands", "imputer", "selected_features",
                 "engineered_features", "selection", "model", "seed", "threads"}

    def __post_init__(self):
        t1, t2, t3 = self.band_thresholds
        if not 0.0 < t1 < t2 < t3 < 1.0:
            raise ConfigError(f"band thresholds must satisfy 0 < t1 < t2 < t3 < 1,"
                              f" got {self.band_thresholds}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        try:
            re.compile(self.histogram_pattern)
        except re.error as exc:
            raise ConfigError(f"bad histogram_pattern: {exc}") from exc

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        _check_keys("config", d, cls._TOP_KEYS)
        kwargs = {}
        if "na_tokens" in d:
            kwargs["na_tokens"] = set(d["na_tokens"])
        for key in ("target_column", "id_column", "histogram_pattern",
                    "histogram_row_drop", "selected_features", "seed", "threads"):
            if key in d:
                kwargs[key] = d[key]
        if "bands" in d:
            _check_keys("bands", d["bands"], {"t1", "t2", "t3"})
            kwargs["band_thresholds"] = (d["bands"].get("t1", DEFAULT_THRESHOLDS[0]),
                                         d["bands"].get("t2", DEFAULT_THRESHOLDS[1]),
                                         d["bands"].get("t3", DEFAULT_THRESHOLDS[2]))
        if "imputer" in d:
            imp = d["imputer"]
            _check_keys("imputer", imp, {"max_iter", "tol", "d2", "d3"})
            kwargs["imputer_max_iter"] = imp.get("max_iter", 10)
            kwargs["imputer_tol"] = imp.get("tol", 1e-3)
            if "d2" in imp:
                kwargs["d2_spec"] = RegressorSpec.from_dict(imp["d2"])
            if "d3" in imp:
                kwargs["d3_spec"] = RegressorSpec.from_dict(imp["d3"])
        if "engineered_features" in d:
            kwargs["engineered_features"] = [
                EngineeredFeatureSpec.from_dict(s) for s in d["engineered_features"]]
        if "selection" in d:
            sel = d["selection"]
            _check_keys("selection", sel, {"estimator", "folds", "step", "keep"})
            if "estimator" in sel:
                kwargs["selection_estimator"] = EstimatorSpec.from_dict(sel["estimator"])
            kwargs["selection_folds"] = sel.get("folds", 5)
            kwargs["selection_step"] = sel.get("step", 1)
            kwargs["selection_keep"] = sel.get("keep", 10)
        if "model" in d:
            kwargs["model"] = ModelConfig.from_dict(d["model"])
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(d)

    def echo(self) -> dict:
        """Config as embedded in reports and bundles."""
        return {
            "na_tokens": sorted(self.na_tokens),
            "target_column": self.target_column,
            "id_column": self.id_column,
            "histogram_pattern": self.histogram_pattern,
            "histogram_row_drop": self.histogram_row_drop,
            "bands": {"t1": self.band_thresholds[0],
                      "t2": self.band_thresholds[1],
                      "t3": self.band_thresholds[2]},
            "imputer": {"max_iter": self.imputer_max_iter,
                        "tol": self.imputer_tol,
                        "d2": self.d2_spec.to_dict(),
                        "d3": self.d3_spec.to_dict()},
            "selected_features": self.selected_features,
            "engineered_features": [s.to_dict() for s in self.engineered_features],
            "selection": {"estimator": self.selection_estimator.to_dict(),
                          "folds": self.selection_folds,
                          "step": self.selection_step,
                          "keep": self.selection_keep},
            "model": self.model.to_dict(),
            "seed": self.seed,
            "threads": self.threads,
        }
