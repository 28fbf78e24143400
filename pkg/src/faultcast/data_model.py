"""Columnar tables with an explicit missing-value mask.

A Table is the carrier used by every stage of the pipeline: a float64
matrix, a boolean mask (True = absent), stable integer row labels that
survive filtering, and unique column names.  Cells where the mask is True
hold NaN placeholders and are never read by any computation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError

DEFAULT_NA_TOKENS = frozenset({"na", "nan", ""})


class Table:
    """Immutable column-major numeric table with missingness mask."""

    def __init__(self, column_names, row_index, values, missing_mask):
        names = list(column_names)
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise DataFormatError(f"duplicate column names: {dupes}")
        index = np.asarray(row_index, dtype=np.int64)
        vals = np.array(values, dtype=np.float64, order="F")
        mask = np.array(missing_mask, dtype=bool, order="F")
        if vals.ndim != 2:
            raise DataFormatError(f"values must be 2-D, got shape {vals.shape}")
        n, p = vals.shape
        if len(names) != p:
            raise DataFormatError(f"{len(names)} column names for {p} columns")
        if index.shape != (n,):
            raise DataFormatError(f"row_index length {index.shape} != {n} rows")
        if mask.shape != (n, p):
            raise DataFormatError(f"mask shape {mask.shape} != values shape {(n, p)}")
        if len(np.unique(index)) != n:
            raise DataFormatError("duplicate row_index labels")
        # keep masked placeholders ignorable and uniform
        vals[mask] = np.nan
        vals.setflags(write=False)
        mask.setflags(write=False)
        index.setflags(write=False)
        self.column_names = names
        self.row_index = index
        self.values = vals
        self.missing_mask = mask
        self._col_pos = {name: j for j, name in enumerate(names)}

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def column_position(self, name: str) -> int:
        try:
            return self._col_pos[name]
        except KeyError:
            raise KeyError(f"unknown column {name!r}") from None

    def column(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """Return (values, mask) views of one column."""
        j = self.column_position(name)
        return self.values[:, j], self.missing_mask[:, j]

    def select_columns(self, names) -> "Table":
        cols = [self.column_position(n) for n in names]
        return Table(list(names), self.row_index,
                     self.values[:, cols], self.missing_mask[:, cols])

    def take_rows(self, positions) -> "Table":
        pos = np.asarray(positions, dtype=np.int64)
        return Table(self.column_names, self.row_index[pos],
                     self.values[pos], self.missing_mask[pos])

    def rows_for_labels(self, labels) -> np.ndarray:
        """Positional indices of the given row_index labels, in given order."""
        lookup = {lab: i for i, lab in enumerate(self.row_index.tolist())}
        try:
            return np.array([lookup[lab] for lab in labels], dtype=np.int64)
        except KeyError as exc:
            raise KeyError(f"row label {exc.args[0]} not present") from None

    def missing_fractions(self) -> np.ndarray:
        if self.n_rows == 0:
            return np.zeros(self.n_cols)
        return self.missing_mask.mean(axis=0)

    def complete_row_mask(self) -> np.ndarray:
        return ~self.missing_mask.any(axis=1)

    def filled_values(self, fill: np.ndarray | None = None) -> np.ndarray:
        """Dense copy with masked cells replaced by per-column fill values.

        Default fill is the observed column mean (0 for all-missing columns).
        """
        out = np.array(self.values, order="F")
        if not self.missing_mask.any():
            return out
        if fill is None:
            fill = observed_column_means(self)
        rows, cols = np.nonzero(self.missing_mask)
        out[rows, cols] = fill[cols]
        return out

    def with_columns(self, names, values, missing_mask) -> "Table":
        """New table with extra columns appended on the right."""
        vals = np.asarray(values, dtype=np.float64)
        mask = np.asarray(missing_mask, dtype=bool)
        if vals.ndim == 1:
            vals = vals[:, None]
            mask = mask[:, None]
        return Table(self.column_names + list(names), self.row_index,
                     np.hstack([self.values, vals]),
                     np.hstack([self.missing_mask, mask]))

    def equals(self, other: "Table") -> bool:
        """Structural equality; placeholder values under the mask are ignored."""
        if self.column_names != other.column_names:
            return False
        if not np.array_equal(self.row_index, other.row_index):
            return False
        if not np.array_equal(self.missing_mask, other.missing_mask):
            return False
        ok = ~self.missing_mask
        return np.array_equal(self.values[ok], other.values[ok])

    def __repr__(self) -> str:
        return f"Table(shape={self.shape}, missing={int(self.missing_mask.sum())})"


def observed_column_means(t: Table) -> np.ndarray:
    """Per-column mean over observed cells; 0.0 for all-missing columns."""
    observed = ~t.missing_mask
    counts = observed.sum(axis=0)
    sums = np.where(observed, t.values, 0.0).sum(axis=0)
    with np.errstate(invalid="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    return means


@dataclass
class ColumnProfile:
    """describe()-style summary of one column over its observed values."""

    name: str
    missing_fraction: float
    count: int
    mean: float | None
    std: float | None
    min: float | None
    p25: float | None
    p50: float | None
    p75: float | None
    max: float | None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "missing_fraction": self.missing_fraction,
            "count": self.count,
            "mean": self.mean,
            "std": self.std,
            "min": self.min,
            "p25": self.p25,
            "p50": self.p50,
            "p75": self.p75,
            "max": self.max,
        }


@dataclass
class LabeledDataset:
    """Feature table plus an aligned binary target (0 = surface, 1 = downhole)."""

    features: Table
    target: np.ndarray

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=np.int64)
        if self.target.shape != (self.features.n_rows,):
            raise DataFormatError(
                f"target length {self.target.shape} != {self.features.n_rows} rows")
        bad = set(np.unique(self.target)) - {0, 1}
        if bad:
            raise DataFormatError(f"target labels must be 0/1, got {sorted(bad)}")

    @property
    def n_rows(self) -> int:
        return self.features.n_rows

    def take_rows(self, positions) -> "LabeledDataset":
        pos = np.asarray(positions, dtype=np.int64)
        return LabeledDataset(self.features.take_rows(pos), self.target[pos])

    def select_columns(self, names) -> "LabeledDataset":
        return LabeledDataset(self.features.select_columns(names), self.target)


def read_csv(path, na_tokens=DEFAULT_NA_TOKENS, target_column: str | None = None,
             id_column: str | None = None):
    """Parse a headed numeric CSV into a Table (or LabeledDataset).

    Cells matching an na_token (case-insensitive, trimmed) become masked.
    ``target_column``, when given, is split off as a 0/1 target and a
    LabeledDataset is returned; a missing target cell in any row is an error.
    ``id_column``, when given, supplies the row_index labels instead of 0..n-1.
    """
    tokens = {t.strip().lower() for t in na_tokens}
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file, no header row") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            dupes = sorted({h for h in header if header.count(h) > 1})
            raise DataFormatError(f"{path}: duplicate column names {dupes}")
        special = {}
        for role, name in (("target", target_column), ("id", id_column)):
            if name is not None:
                if name not in header:
                    raise DataFormatError(f"{path}: no {role} column {name!r}")
                special[role] = header.index(name)
        feature_cols = [j for j in range(len(header)) if j not in special.values()]

        rows, labels, ids = [], [], []
        for i, record in enumerate(reader):
            if len(record) != len(header):
                raise DataFormatError(
                    f"{path}: row {i} has {len(record)} cells, expected {len(header)}")
            parsed = np.empty(len(header))
            missing = np.zeros(len(header), dtype=bool)
            for j, cell in enumerate(record):
                text = cell.strip()
                if text.lower() in tokens:
                    parsed[j] = np.nan
                    missing[j] = True
                    continue
                try:
                    parsed[j] = float(text)
                except ValueError:
                    raise DataFormatError(
                        f"{path}: row {i}, column {header[j]!r}: "
                        f"cannot parse {cell!r} as a number") from None
            if "target" in special:
                jt = special["target"]
                if missing[jt]:
                    raise DataFormatError(
                        f"{path}: row {i}: missing value in target column")
                lab = parsed[jt]
                if lab not in (0.0, 1.0):
                    raise DataFormatError(
                        f"{path}: row {i}: target must be 0 or 1, got {lab}")
                labels.append(int(lab))
            if "id" in special:
                ji = special["id"]
                if missing[ji] or parsed[ji] != int(parsed[ji]):
                    raise DataFormatError(
                        f"{path}: row {i}: id column must hold integers")
                ids.append(int(parsed[ji]))
            rows.append((parsed[feature_cols], missing[feature_cols]))

    n = len(rows)
    values = np.array([r[0] for r in rows]) if n else np.empty((0, len(feature_cols)))
    mask = np.array([r[1] for r in rows]) if n else np.zeros((0, len(feature_cols)), bool)
    index = np.array(ids, dtype=np.int64) if id_column else np.arange(n, dtype=np.int64)
    table = Table([header[j] for j in feature_cols], index, values, mask)
    if target_column is not None:
        return LabeledDataset(table, np.array(labels, dtype=np.int64))
    return table


def write_csv(t: Table, path, target: np.ndarray | None = None,
              target_column: str = "class", na_token: str = "na") -> None:
    """Write a Table with a leading ``id`` column; missing cells as ``na``.

    Floats are emitted with repr round-trip precision so read_csv(write_csv(t))
    reproduces values and mask exactly.
    """
    header = ["id"] + t.column_names
    if target is not None:
        target = np.asarray(target)
        if target.shape != (t.n_rows,):
            raise DataFormatError("target length does not match table")
        header.append(target_column)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(t.n_rows):
            record = [str(int(t.row_index[i]))]
            for j in range(t.n_cols):
                if t.missing_mask[i, j]:
                    record.append(na_token)
                else:
                    record.append(repr(float(t.values[i, j])))
            if target is not None:
                record.append(str(int(target[i])))
            writer.writerow(record)


def profile_columns(t: Table) -> list[ColumnProfile]:
    """Summaries with linearly interpolated percentiles, one per column.

    All-missing columns get missing_fraction 1.0 and None statistics; a
    single-value column has std None (sample std is undefined at n = 1).
    """
    if t.n_rows < 1:
        raise DataFormatError("cannot profile an empty table")
    profiles = []
    for j, name in enumerate(t.column_names):
        col = t.values[:, j]
        observed = col[~t.missing_mask[:, j]]
        frac = float(t.missing_mask[:, j].mean())
        if observed.size == 0:
            profiles.append(ColumnProfile(name, 1.0, 0, None, None, None,
                                          None, None, None, None))
            continue
        p25, p50, p75 = np.quantile(observed, [0.25, 0.50, 0.75], method="linear")
        std = float(observed.std(ddof=1)) if observed.size > 1 else None
        profiles.append(ColumnProfile(
            name, frac, int(observed.size),
            float(observed.mean()), std,
            float(observed.min()), float(p25), float(p50), float(p75),
            float(observed.max())))
    return profiles


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_split(d: LabeledDataset, test_fraction: float, seed: int
                     ) -> tuple[LabeledDataset, LabeledDataset]:
    """Split rows into train/test keeping the class ratio.

    Per class, round(count * test_fraction) rows (at least 1) go to test.
    Row order inside each part follows the original order; the same seed
    always produces the same partition.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DataFormatError(f"test_fraction must be in (0,1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    in_test = np.zeros(d.n_rows, dtype=bool)
    for label in (0, 1):
        members = np.flatnonzero(d.target == label)
        if members.size < 2:
            raise DataFormatError(
                f"class {label} has {members.size} rows; need at least 2 to split")
        k = min(max(_round_half_up(members.size * test_fraction), 1),
                members.size - 1)
        picked = rng.permutation(members)[:k]
        in_test[picked] = True
    test_pos = np.flatnonzero(in_test)
    train_pos = np.flatnonzero(~in_test)
    return d.take_rows(train_pos), d.take_rows(test_pos)


def join_on_index(tables: list[Table]) -> Table:
    """Column-wise join on row_index labels.

    Rows are the intersection of all row_index sets in the order of the
    first table; columns are concatenated in argument order and must be
    disjoint across inputs.
    """
    if not tables:
        raise DataFormatError("join_on_index needs at least one table")
    seen: dict[str, int] = {}
    for k, t in enumerate(tables):
        for name in t.column_names:
            if name in seen:
                raise DataFormatError(
                    f"column {name!r} appears in tables {seen[name]} and {k}")
            seen[name] = k
    common = set(tables[0].row_index.tolist())
    for t in tables[1:]:
        common &= set(t.row_index.tolist())
    ordered = [lab for lab in tables[0].row_index.tolist() if lab in common]
    parts = [t.take_rows(t.rows_for_labels(ordered)) for t in tables]
    names = [n for t in parts for n in t.column_names]
    if parts[0].n_rows == 0:
        values = np.empty((0, len(names)))
        mask = np.zeros((0, len(names)), dtype=bool)
    else:
        values = np.hstack([t.values for t in parts])
        mask = np.hstack([t.missing_mask for t in parts])
    return Table(names, np.array(ordered, dtype=np.int64), values, mask)


def drop_rows_with_missing(t: Table) -> Table:
    """Keep exactly the rows with no missing cell; labels are preserved."""
    return t.take_rows(np.flatnonzero(t.complete_row_mask()))
