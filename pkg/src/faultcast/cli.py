"""Command-line front end.

Subcommands: profile | synth | preprocess | select | train | evaluate |
predict | compare.  Every failure exits nonzero with a single parseable
line on stderr (``faultcast: error: <message>``) and removes any partially
written outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .bundles import (deserialize_classifier, read_bundle_any,
                      serialize_classifier, write_bundle)
from .config import ModelConfig, PipelineConfig
from .data_model import (LabeledDataset, Table, profile_columns, read_csv,
                         write_csv)
from .errors import ConfigError, DataFormatError, FaultcastError
from .feature_selection import rfe, rfecv
from .learners import (DecisionTreeClassifier, GradientBoostedClassifier,
                       LogisticRegression, RandomForestClassifier)
from .metrics import evaluate_predictions, format_percent
from .pipeline import Preprocessor
from .report import (RunReport, canonical_json, comparison_rows,
                     comparison_text, file_digest, load_run_report,
                     render_report_figures, write_comparison)
from .stacking import load_model, predict_stacked, save_model, train_stacked
from .synthetic import MissingnessRule, SyntheticSpec, generate


class OutputTracker:
    """Registers output paths so a failed run leaves nothing behind."""

    def __init__(self):
        self.paths: list[str] = []

    def add(self, path: str) -> str:
        self.paths.append(path)
        return path

    def cleanup(self) -> None:
        for path in self.paths:
            try:
                os.remove(path)
            except OSError:
                pass


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    return cfg


def _csv_has_column(path, name: str) -> bool:
    with open(path, newline="") as fh:
        header = fh.readline()
    return name in [h.strip() for h in header.rstrip("\n").split(",")]


def _read_table(path, cfg: PipelineConfig, with_target: bool):
    """Table or LabeledDataset; the configured id column is used when present."""
    id_col = cfg.id_column if (cfg.id_column
                               and _csv_has_column(path, cfg.id_column)) else None
    target = cfg.target_column if with_target else None
    if target and not _csv_has_column(path, target):
        raise DataFormatError(f"{path}: target column {cfg.target_column!r} "
                              "not found")
    return read_csv(path, na_tokens=cfg.na_tokens, target_column=target,
                    id_column=id_col)


# ---------------------------------------------------------------------------
# subcommands


def cmd_profile(args, out: OutputTracker) -> None:
    cfg = _load_config(args)
    table = _read_table(args.data, cfg, with_target=False)
    profiles = profile_columns(table)
    path = out.add(os.path.join(_outdir(args), "profiles.json"))
    with open(path, "w") as fh:
        fh.write(canonical_json([p.to_dict() for p in profiles]))
    print(f"profiled {table.n_rows} rows x {table.n_cols} columns -> {path}")


def _synth_spec(args) -> SyntheticSpec:
    if args.spec_json:
        with open(args.spec_json) as fh:
            raw = json.load(fh)
        rules = [MissingnessRule(**r) for r in raw.pop("missingness", [])]
        return SyntheticSpec(missingness=rules, **raw)
    missingness = []
    if args.mcar_rate > 0:
        missingness.append(MissingnessRule(columns="measures", mechanism="mcar",
                                           rate=args.mcar_rate))
    if args.hist_mcar_rate > 0:
        missingness.append(MissingnessRule(columns="histogram", mechanism="mcar",
                                           rate=args.hist_mcar_rate))
    if args.mar_rate > 0:
        missingness.append(MissingnessRule(columns="measures", mechanism="mar",
                                           rate=args.mar_rate))
    return SyntheticSpec(
        n_rows=args.rows, n_measures=args.measures,
        n_hist_sensors=args.hist_sensors, bins_per_sensor=args.bins,
        positive_fraction=args.positive_fraction,
        n_informative=args.informative, signal=args.signal,
        correlation=args.correlation, marginal=args.marginal,
        missingness=missingness, seed=args.seed if args.seed is not None else 0)


def cmd_synth(args, out: OutputTracker) -> None:
    spec = _synth_spec(args)
    dataset, truth = generate(spec)
    outdir = _outdir(args)
    data_path = out.add(os.path.join(outdir, "synth_data.csv"))
    truth_path = out.add(os.path.join(outdir, "synth_truth.csv"))
    manifest_path = out.add(os.path.join(outdir, "synth_manifest.json"))
    write_csv(dataset.features, data_path, target=dataset.target)
    write_csv(truth, truth_path)
    with open(manifest_path, "w") as fh:
        fh.write(canonical_json(spec.manifest()))
    print(f"wrote {dataset.n_rows} rows ({int(dataset.target.sum())} positive) "
          f"-> {data_path}")


def cmd_preprocess(args, out: OutputTracker) -> None:
    cfg = _load_config(args)
    dataset = _read_table(args.train, cfg, with_target=True)
    pre = Preprocessor(cfg)
    transformed = pre.fit_transform(dataset)
    outdir = _outdir(args)
    bundle_path = out.add(os.path.join(outdir, "preprocessor.bundle.gz"))
    pre.save(bundle_path)
    csv_path = out.add(os.path.join(outdir, "train_preprocessed.csv"))
    write_csv(transformed.features, csv_path, target=transformed.target,
              target_column=cfg.target_column)
    if pre.band_assignment is not None:
        bands_path = out.add(os.path.join(outdir, "bands.json"))
        with open(bands_path, "w") as fh:
            fh.write(canonical_json(pre.band_assignment))
    dropped = dataset.n_rows - transformed.n_rows
    print(f"preprocessed {transformed.n_rows} rows "
          f"({dropped} dropped) x {transformed.features.n_cols} columns")
    print(f"bundle -> {bundle_path}\ndata   -> {csv_path}")


def cmd_select(args, out: OutputTracker) -> None:
    cfg = _load_config(args)
    dataset = _read_table(args.data, cfg, with_target=True)
    if args.include_pattern:
        import re
        pattern = re.compile(args.include_pattern)
        keep = [c for c in dataset.features.column_names if pattern.search(c)]
        if not keep:
            raise DataFormatError(
                f"--include-pattern {args.include_pattern!r} matches nothing")
        dataset = dataset.select_columns(keep)
    if args.mode == "rfe":
        result = rfe(dataset, cfg.selection_estimator, keep=cfg.selection_keep,
                     step=cfg.selection_step, seed=cfg.seed)
    else:
        result = rfecv(dataset, cfg.selection_estimator,
                       folds=cfg.selection_folds, step=cfg.selection_step,
                       seed=cfg.seed)
    path = out.add(os.path.join(_outdir(args), "selection.json"))
    doc = {"mode": args.mode, "estimator": cfg.selection_estimator.to_dict(),
           **result.to_dict()}
    with open(path, "w") as fh:
        fh.write(canonical_json(doc))
    print(f"selected {len(result.selected)} of {dataset.features.n_cols} "
          f"features -> {path}")


def _fit_single(mc: ModelConfig, X, y, seed: int):
    params = dict(mc.params)
    if mc.type == "gbt":
        weighted = params.pop("weighted", False)
        model = GradientBoostedClassifier(
            class_weights="balanced" if weighted else None, seed=seed, **params)
    elif mc.type == "tree":
        model = DecisionTreeClassifier(seed=seed, **params)
    elif mc.type == "forest":
        model = RandomForestClassifier(seed=seed, **params)
    elif mc.type == "logistic":
        model = LogisticRegression(**params)
    else:
        raise ConfigError(f"cannot train model type {mc.type!r}")
    return model.fit(X, y)


def _maybe_preprocess(args, cfg, dataset):
    if getattr(args, "preprocessor", None):
        pre = Preprocessor.load(args.preprocessor)
        if isinstance(dataset, LabeledDataset):
            return pre.transform(dataset), pre
        return pre.transform_table(dataset), pre
    return dataset, None


def _require_complete(table: Table) -> None:
    if table.missing_mask.any():
        raise DataFormatError("features contain missing values; run "
                              "`faultcast preprocess` first or pass "
                              "--preprocessor")


def cmd_train(args, out: OutputTracker) -> None:
    cfg = _load_config(args)
    started = time.perf_counter()
    dataset = _read_table(args.train, cfg, with_target=True)
    dataset, pre = _maybe_preprocess(args, cfg, dataset)
    _require_complete(dataset.features)

    outdir = _outdir(args)
    model_path = out.add(os.path.join(outdir, "model.bundle.gz"))
    if cfg.model.type == "stacked":
        stack_cfg = cfg.model.stacking_config(cfg.seed)
        model = train_stacked(dataset, stack_cfg, threads=cfg.threads)
        save_model(model, model_path)
        preds = predict_stacked(model, dataset.features, threads=cfg.threads)
    else:
        X = np.ascontiguousarray(dataset.features.values)
        model = _fit_single(cfg.model, X, dataset.target, cfg.seed)
        write_bundle(model_path, "classifier", {
            "model": serialize_classifier(model),
            "columns": dataset.features.column_names,
            "config": cfg.echo(),
            "model_desc": cfg.model.describe(cfg.seed),
        })
        preds = model.predict(X)

    classification = evaluate_predictions(dataset.target, preds)
    rep = RunReport.build(
        model=cfg.model.describe(cfg.seed), seed=cfg.seed, config=cfg.echo(),
        classification=classification,
        timing_seconds=round(time.perf_counter() - started, 3),
        data_digest=file_digest(args.train),
        selected_features=cfg.selected_features,
        imputation_bands=pre.band_assignment if pre else None)
    report_path = out.add(os.path.join(outdir, "train_report.json"))
    with open(report_path, "w") as fh:
        fh.write(rep.to_json())
    print(f"trained {rep.model}; training macro F1 = "
          f"{classification.macro_f1:.5f}")
    print(f"model  -> {model_path}\nreport -> {report_path}")


def _load_any_model(path):
    """Returns (model, training columns, description) for either bundle kind."""
    kind, payload = read_bundle_any(path)
    if kind == "stacked_ensemble":
        model = load_model(path)
        return model, payload["columns"], model.config.describe()
    if kind == "classifier":
        model = deserialize_classifier(payload["model"])
        desc = payload.get("model_desc", type(model).__name__)
        return model, payload["columns"], desc
    raise DataFormatError(f"{path}: bundle kind {kind!r} is not a model")


def _predict_with(model, columns, table: Table, threads: int) -> np.ndarray:
    missing = [c for c in columns if c not in table.column_names]
    if missing:
        raise DataFormatError(f"input lacks model columns {missing[:5]}"
                              + ("..." if len(missing) > 5 else ""))
    aligned = table.select_columns(columns)
    _require_complete(aligned)
    if hasattr(model, "bases"):
        return predict_stacked(model, aligned, threads=threads)
    return model.predict(np.ascontiguousarray(aligned.values))


def cmd_evaluate(args, out: OutputTracker) -> None:
    cfg = _load_config(args)
    started = time.perf_counter()
    model, columns, model_desc = _load_any_model(args.model)
    dataset = _read_table(args.test, cfg, with_target=True)
    dataset, pre = _maybe_preprocess(args, cfg, dataset)
    preds = _predict_with(model, columns, dataset.features, cfg.threads)
    classification = evaluate_predictions(dataset.target, preds)

    rep = RunReport.build(
        model=model_desc, seed=cfg.seed, config=cfg.echo(),
        classification=classification,
        timing_seconds=round(time.perf_counter() - started, 3),
        data_digest=file_digest(args.test),
        selected_features=cfg.selected_features,
        imputation_bands=pre.band_assignment if pre else None)

    outdir = _outdir(args)
    report_path = out.add(os.path.join(outdir, "eval_report.json"))
    with open(report_path, "w") as fh:
        fh.write(rep.to_json())
    for path in render_report_figures(rep, outdir):
        out.add(path)
    print(f"macro F1 = {classification.macro_f1:.5f}  "
          f"misclassified = {format_percent(classification.misclassification_rate)}")
    print(f"report -> {report_path}")


def cmd_predict(args, out: OutputTracker) -> None:
    cfg = _load_config(args)
    model, columns, _ = _load_any_model(args.model)
    table = _read_table(args.data, cfg, with_target=False)
    if cfg.target_column in table.column_names:
        table = table.select_columns(
            [c for c in table.column_names if c != cfg.target_column])
    table, _pre = _maybe_preprocess(args, cfg, table)
    preds = _predict_with(model, columns, table, cfg.threads)
    path = out.add(os.path.join(_outdir(args), "predictions.csv"))
    with open(path, "w") as fh:
        fh.write("id,prediction\n")
        for lab, p in zip(table.row_index.tolist(), preds.tolist()):
            fh.write(f"{lab},{p}\n")
    print(f"{len(preds)} predictions -> {path}")


def cmd_compare(args, out: OutputTracker) -> None:
    reports = [load_run_report(p) for p in args.reports]
    rows = comparison_rows(reports)
    print(comparison_text(rows))
    for path in write_comparison(rows, _outdir(args)):
        out.add(path)
    print(f"\nwrote compare.csv / compare.json / compare.png under {args.out}")


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faultcast",
        description="Sensor-failure classification pipeline")
    parser.add_argument("--version", action="version",
                        version=f"faultcast {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config JSON")
    common.add_argument("--seed", type=int, default=None,
                        help="master seed (overrides config)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads for ensemble stages")
    common.add_argument("--out", default=".", help="output directory")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", parents=[common],
                       help="column profiles as JSON")
    p.add_argument("data", help="input CSV")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("synth", parents=[common],
                       help="generate a synthetic sensor dataset")
    p.add_argument("--spec-json", help="full SyntheticSpec as JSON")
    p.add_argument("--rows", type=int, default=6000)
    p.add_argument("--measures", type=int, default=20)
    p.add_argument("--hist-sensors", type=int, default=7)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--positive-fraction", type=float, default=0.0167)
    p.add_argument("--informative", type=int, default=5)
    p.add_argument("--signal", type=float, default=1.5)
    p.add_argument("--correlation", type=float, default=0.6)
    p.add_argument("--marginal", choices=["lognormal", "gaussian"],
                   default="lognormal")
    p.add_argument("--mcar-rate", type=float, default=0.0,
                   help="MCAR rate on the measures block")
    p.add_argument("--hist-mcar-rate", type=float, default=0.0,
                   help="MCAR rate on the histogram block")
    p.add_argument("--mar-rate", type=float, default=0.0,
                   help="MAR rate on the measures block (rank-driven)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", parents=[common],
                       help="fit preprocessing on training data")
    p.add_argument("train", help="training CSV (with target column)")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("select", parents=[common],
                       help="recursive feature elimination")
    p.add_argument("data", help="labelled CSV")
    p.add_argument("--mode", choices=["rfe", "rfecv"], default="rfecv")
    p.add_argument("--include-pattern",
                   help="restrict to columns matching this regex")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", parents=[common], help="train the model")
    p.add_argument("train", help="training CSV (with target column)")
    p.add_argument("--preprocessor", help="fitted preprocessor bundle")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common],
                       help="score a model on held-out data")
    p.add_argument("model", help="model bundle")
    p.add_argument("test", help="test CSV (with target column)")
    p.add_argument("--preprocessor", help="fitted preprocessor bundle")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", parents=[common], help="emit predictions")
    p.add_argument("model", help="model bundle")
    p.add_argument("data", help="input CSV")
    p.add_argument("--preprocessor", help="fitted preprocessor bundle")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("compare", parents=[common],
                       help="merge run reports into a comparison table")
    p.add_argument("reports", nargs="+", help="RunReport JSON files")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    tracker = OutputTracker()
    try:
        args.func(args, tracker)
        return 0
    except FaultcastError as exc:
        tracker.cleanup()
        print(f"faultcast: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        tracker.cleanup()
        print(f"faultcast: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
