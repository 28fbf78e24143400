"""Run reports: the JSON contract shared with external harnesses, plus the
rendered artifacts (normalized-matrix heatmaps, comparison chart/CSV).

Every training or evaluation run emits one RunReport.  The JSON layout is
frozen: the same schema is produced by the baselines harness, and
``compare`` merges any mix of the two.  Canonical serialization (sorted
keys, 2-space indent, trailing newline) keeps golden-file tests byte-exact.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import DataFormatError
from .metrics import ClassificationReport, format_percent

SCHEMA_VERSION = 1

_REQUIRED_KEYS = frozenset({
    "schema_version", "run_id", "model", "seed", "config", "timing_seconds",
    "metrics", "selected_features", "imputation_bands",
})
_REQUIRED_METRICS = frozenset({
    "confusion_matrix", "precision", "recall", "f1", "macro_f1",
    "misclassification_rate", "support",
})


@dataclass
class RunReport:
    run_id: str
    model: str
    seed: int
    config: dict
    timing_seconds: float
    metrics: dict
    selected_features: list[str] | None = None
    imputation_bands: dict[str, str] | None = None
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def build(cls, model: str, seed: int, config: dict,
              classification: ClassificationReport, timing_seconds: float,
              data_digest: str = "", selected_features=None,
              imputation_bands=None) -> "RunReport":
        run_id = make_run_id(model, seed, config, data_digest)
        return cls(run_id=run_id, model=model, seed=seed, config=config,
                   timing_seconds=timing_seconds,
                   metrics=classification.to_dict(),
                   selected_features=selected_features,
                   imputation_bands=imputation_bands)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "run_id": self.run_id,
            "model": self.model,
            "seed": self.seed,
            "config": self.config,
            "timing_seconds": self.timing_seconds,
            "metrics": self.metrics,
            "selected_features": self.selected_features,
            "imputation_bands": self.imputation_bands,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        problems = validate_run_report(d)
        if problems:
            raise DataFormatError("invalid run report: " + "; ".join(problems))
        return cls(run_id=d["run_id"], model=d["model"], seed=d["seed"],
                   config=d["config"], timing_seconds=d["timing_seconds"],
                   metrics=d["metrics"],
                   selected_features=d["selected_features"],
                   imputation_bands=d["imputation_bands"],
                   schema_version=d["schema_version"])


def canonical_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def make_run_id(model: str, seed: int, config: dict, data_digest: str) -> str:
    blob = canonical_json({"model": model, "seed": seed, "config": config,
                           "data": data_digest})
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def validate_run_report(d: dict) -> list[str]:
    """Schema check; returns human-readable problems (empty = valid)."""
    problems = []
    if not isinstance(d, dict):
        return ["report is not a JSON object"]
    missing = _REQUIRED_KEYS - d.keys()
    extra = d.keys() - _REQUIRED_KEYS
    if missing:
        problems.append(f"missing keys: {sorted(missing)}")
    if extra:
        problems.append(f"unknown keys: {sorted(extra)}")
    if d.get("schema_version") != SCHEMA_VERSION:
        problems.append(f"schema_version {d.get('schema_version')!r} "
                        f"(this build reads {SCHEMA_VERSION})")
    metrics = d.get("metrics")
    if not isinstance(metrics, dict):
        problems.append("metrics is not an object")
    else:
        lacking = _REQUIRED_METRICS - metrics.keys()
        if lacking:
            problems.append(f"metrics missing: {sorted(lacking)}")
    return problems


def load_run_report(path) -> RunReport:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: not valid JSON ({exc})") from exc
    try:
        return RunReport.from_dict(d)
    except DataFormatError as exc:
        raise DataFormatError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# rendered artifacts


def _matrix_figure(matrix: np.ndarray, title: str, path) -> None:
    fig, ax = plt.subplots(figsize=(3.6, 3.2))
    im = ax.imshow(matrix, cmap="Blues", vmin=0.0, vmax=1.0)
    for i in range(2):
        for j in range(2):
            value = matrix[i, j]
            ax.text(j, i, f"{value:.4f}",
                    ha="center", va="center",
                    color="white" if value > 0.6 else "black")
    ax.set_xticks([0, 1], ["pred 0", "pred 1"])
    ax.set_yticks([0, 1], ["true 0", "true 1"])
    ax.set_title(title)
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_report_figures(rep: RunReport, outdir) -> list[str]:
    """Precision/recall heatmaps plus the raw confusion counts as CSV."""
    written = []
    metrics = rep.metrics
    pm = np.asarray(metrics["precision_matrix"], dtype=float)
    rm = np.asarray(metrics["recall_matrix"], dtype=float)
    for matrix, stem, title in ((pm, "precision_matrix", "Precision matrix"),
                                (rm, "recall_matrix", "Recall matrix")):
        path = f"{outdir}/{stem}.png"
        _matrix_figure(matrix, f"{title}\nmacro F1 = {metrics['macro_f1']:.5f}",
                       path)
        written.append(path)
    cm_path = f"{outdir}/confusion_matrix.csv"
    with open(cm_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["", "pred_0", "pred_1"])
        for i, row in enumerate(metrics["confusion_matrix"]):
            writer.writerow([f"true_{i}", *row])
    written.append(cm_path)
    return written


_COMPARE_FIELDS = ("model", "macro_f1", "precision_class1", "recall_class1",
                   "misclassification", "run_id")


def comparison_rows(reports: list[RunReport]) -> list[dict]:
    """One row per report, best macro F1 first."""
    rows = []
    for rep in reports:
        m = rep.metrics
        rows.append({
            "model": rep.model,
            "macro_f1": m["macro_f1"],
            "precision_class1": m["precision"][1],
            "recall_class1": m["recall"][1],
            "misclassification": m["misclassification_rate"],
            "run_id": rep.run_id,
        })
    rows.sort(key=lambda r: -r["macro_f1"])
    return rows


def comparison_text(rows: list[dict]) -> str:
    header = (f"{'Model':<42} {'Macro F1':>9} {'Prec c1':>8} "
              f"{'Rec c1':>8} {'Misclass':>10}")
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(f"{r['model']:<42} {r['macro_f1']:>9.5f} "
                     f"{format_percent(r['precision_class1']):>8} "
                     f"{format_percent(r['recall_class1']):>8} "
                     f"{format_percent(r['misclassification']):>10}")
    return "\n".join(lines)


def write_comparison(rows: list[dict], outdir) -> list[str]:
    """CSV + JSON + bar chart for a set of comparable runs."""
    written = []
    csv_path = f"{outdir}/compare.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_COMPARE_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    written.append(csv_path)

    json_path = f"{outdir}/compare.json"
    with open(json_path, "w") as fh:
        fh.write(canonical_json(rows))
    written.append(json_path)

    fig, ax = plt.subplots(figsize=(7.0, 0.5 * len(rows) + 1.8))
    labels = [r["model"] for r in rows][::-1]
    scores = [r["macro_f1"] for r in rows][::-1]
    ax.barh(labels, scores, color="#3b6ea5")
    for i, s in enumerate(scores):
        ax.text(s, i, f" {s:.5f}", va="center")
    ax.set_xlabel("macro F1")
    ax.set_xlim(0, 1.12)
    ax.set_title("Model comparison")
    fig.tight_layout()
    png_path = f"{outdir}/compare.png"
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    written.append(png_path)
    return written
