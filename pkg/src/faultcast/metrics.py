"""Confusion-matrix evaluation for the binary failure-type task.

Macro F1 is the headline number everywhere in this project: with ~98/2
class imbalance, accuracy and even weighted F1 look fine for a model that
never predicts the minority class, while macro F1 drops to ~0.5.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError


@dataclass(frozen=True)
class ConfusionMatrix:
    """2x2 counts; rows are the true class, columns the predicted class."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (2, 2) or (c < 0).any():
            raise DataFormatError("confusion matrix must be 2x2 non-negative counts")
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __getitem__(self, key):
        return self.counts[key]


def confusion(y_true, y_pred) -> ConfusionMatrix:
    """Count cm[i][j] = #{true == i and pred == j} over 0/1 labels."""
    yt = np.asarray(y_true, dtype=np.int64).ravel()
    yp = np.asarray(y_pred, dtype=np.int64).ravel()
    if yt.shape != yp.shape:
        raise DataFormatError(f"length mismatch: {yt.shape} vs {yp.shape}")
    if yt.size < 1:
        raise DataFormatError("need at least one labelled row")
    for name, arr in (("y_true", yt), ("y_pred", yp)):
        bad = set(np.unique(arr)) - {0, 1}
        if bad:
            raise DataFormatError(f"{name} contains labels outside 0/1: {sorted(bad)}")
    counts = np.zeros((2, 2), dtype=np.int64)
    np.add.at(counts, (yt, yp), 1)
    return ConfusionMatrix(counts)


@dataclass
class ClassificationReport:
    """Per-class precision/recall/F1, macro F1, and normalized matrices.

    Zero denominators yield 0.0 and the affected quantity is listed in
    ``zero_division_flags`` instead of raising.
    """

    confusion_matrix: ConfusionMatrix
    precision: list[float]
    recall: list[float]
    f1: list[float]
    macro_f1: float
    misclassification_rate: float
    support: list[int]
    precision_matrix: np.ndarray
    recall_matrix: np.ndarray
    zero_division_flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "confusion_matrix": self.confusion_matrix.counts.tolist(),
            "precision": list(self.precision),
            "recall": list(self.recall),
            "f1": list(self.f1),
            "macro_f1": self.macro_f1,
            "misclassification_rate": self.misclassification_rate,
            "support": list(self.support),
            "precision_matrix": self.precision_matrix.tolist(),
            "recall_matrix": self.recall_matrix.tolist(),
            "zero_division_flags": list(self.zero_division_flags),
        }


def report(cm: ConfusionMatrix) -> ClassificationReport:
    """Derive the full report from a confusion matrix."""
    counts = cm.counts.astype(np.float64)
    if cm.total == 0:
        raise DataFormatError("empty confusion matrix")
    col_sums = counts.sum(axis=0)
    row_sums = counts.sum(axis=1)
    flags = []

    precision, recall, f1 = [], [], []
    for c in (0, 1):
        if col_sums[c] > 0:
            prec = counts[c, c] / col_sums[c]
        else:
            prec = 0.0
            flags.append(f"precision_{c}")
        if row_sums[c] > 0:
            rec = counts[c, c] / row_sums[c]
        else:
            rec = 0.0
            flags.append(f"recall_{c}")
        if prec + rec > 0:
            f = 2.0 * prec * rec / (prec + rec)
        else:
            f = 0.0
            flags.append(f"f1_{c}")
        precision.append(float(prec))
        recall.append(float(rec))
        f1.append(float(f))

    with np.errstate(invalid="ignore", divide="ignore"):
        prec_matrix = np.where(col_sums > 0, counts / np.maximum(col_sums, 1), 0.0)
        rec_matrix = np.where(row_sums[:, None] > 0,
                              counts / np.maximum(row_sums[:, None], 1), 0.0)

    return ClassificationReport(
        confusion_matrix=cm,
        precision=precision,
        recall=recall,
        f1=f1,
        macro_f1=float((f1[0] + f1[1]) / 2.0),
        misclassification_rate=float((counts[0, 1] + counts[1, 0]) / cm.total),
        support=[int(row_sums[0]), int(row_sums[1])],
        precision_matrix=prec_matrix,
        recall_matrix=rec_matrix,
        zero_division_flags=flags,
    )


def evaluate_predictions(y_true, y_pred) -> ClassificationReport:
    return report(confusion(y_true, y_pred))


def format_percent(x: float) -> str:
    """Percentage with 5 significant figures, e.g. 0.0037443 -> '0.37443%'."""
    return f"{x * 100.0:.5g}%"
