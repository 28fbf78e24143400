"""The shared run-report JSON contract, reimplemented harness-side.

This module intentionally does not import faultcast: the report schema is
the cross-package contract, so the harness writes it independently and the
tests prove the two sides agree (a harness report must pass through
``faultcast compare`` with no field loss).
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

SCHEMA_VERSION = 1

REQUIRED_KEYS = frozenset({
    "schema_version", "run_id", "model", "seed", "config", "timing_seconds",
    "metrics", "selected_features", "imputation_bands",
})
REQUIRED_METRICS = frozenset({
    "confusion_matrix", "precision", "recall", "f1", "macro_f1",
    "misclassification_rate", "support",
})


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


def classification_metrics(y_true, y_pred) -> dict:
    """Confusion-matrix metrics matching the primary's conventions
    (zero denominators give 0.0 and a flag, macro F1 is the plain mean)."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    counts = np.zeros((2, 2), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    col = counts.sum(axis=0).astype(float)
    row = counts.sum(axis=1).astype(float)
    flags = []
    precision, recall, f1 = [], [], []
    for c in (0, 1):
        p = counts[c, c] / col[c] if col[c] > 0 else 0.0
        if col[c] == 0:
            flags.append(f"precision_{c}")
        r = counts[c, c] / row[c] if row[c] > 0 else 0.0
        if row[c] == 0:
            flags.append(f"recall_{c}")
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        if p + r == 0:
            flags.append(f"f1_{c}")
        precision.append(float(p))
        recall.append(float(r))
        f1.append(float(f))
    with np.errstate(invalid="ignore", divide="ignore"):
        pm = np.where(col > 0, counts / np.maximum(col, 1), 0.0)
        rm = np.where(row[:, None] > 0, counts / np.maximum(row[:, None], 1),
                      0.0)
    return {
        "confusion_matrix": counts.tolist(),
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "macro_f1": float((f1[0] + f1[1]) / 2.0),
        "misclassification_rate": float(
            (counts[0, 1] + counts[1, 0]) / counts.sum()),
        "support": [int(row[0]), int(row[1])],
        "precision_matrix": pm.tolist(),
        "recall_matrix": rm.tolist(),
        "zero_division_flags": flags,
    }


def build_report(model: str, seed: int, config: dict, metrics: dict,
                 timing_seconds: float, data_digest: str) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "run_id": make_run_id(model, seed, config, data_digest),
        "model": model,
        "seed": seed,
        "config": config,
        "timing_seconds": timing_seconds,
        "metrics": metrics,
        "selected_features": None,
        "imputation_bands": None,
    }


def validate_report(d: dict) -> list[str]:
    problems = []
    missing = REQUIRED_KEYS - d.keys()
    extra = d.keys() - REQUIRED_KEYS
    if missing:
        problems.append(f"missing keys: {sorted(missing)}")
    if extra:
        problems.append(f"unknown keys: {sorted(extra)}")
    if d.get("schema_version") != SCHEMA_VERSION:
        problems.append(f"unsupported schema_version "
                        f"{d.get('schema_version')!r}")
    metrics = d.get("metrics")
    if not isinstance(metrics, dict) or REQUIRED_METRICS - metrics.keys():
        problems.append("metrics incomplete")
    return problems
