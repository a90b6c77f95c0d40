"""Tabular data model, CSV ingestion and the labeled-dataset abstraction.

A :class:`Table` is a typed, immutable grid of cells read from (or written to)
an RFC-4180 style CSV file. A :class:`LabeledDataset` is what the models,
mitigation and evaluation code actually consume: a dense float feature
matrix plus label, protected attribute, instance weights and group ids.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

KINDS = ("identifier", "boolean", "integer", "float", "categorical", "date", "time")


class DataError(ValueError):
    """Raised for malformed tables, CSV files and dataset contracts."""


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    levels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.levels is not None and self.kind != "categorical":
            raise DataError(f"column {self.name!r}: levels only apply to categorical columns")


def _check_cell(col: Column, value: Any) -> bool:
    if value is None:
        return True
    kind = col.kind
    if kind in ("identifier", "categorical"):
        if not isinstance(value, str) or value == "":
            return False
        return col.levels is None or value in col.levels
    if kind == "boolean":
        return isinstance(value, bool)
    if kind == "integer":
        return isinstance(value, (int, np.integer)) and not isinstance(value, bool)
    if kind == "float":
        return isinstance(value, (float, int, np.floating, np.integer)) and not isinstance(value, bool)
    if kind == "date":
        return isinstance(value, dt.date) and not isinstance(value, dt.datetime)
    if kind == "time":
        return isinstance(value, dt.time)
    return False


@dataclass(frozen=True)
class Table:
    """Immutable table; missing cells are ``None``."""

    name: str
    columns: tuple[Column, ...]
    rows: tuple[tuple, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise DataError(f"table {self.name!r}: duplicate column names")
        width = len(self.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise DataError(f"table {self.name!r} row {i}: expected {width} cells, got {len(row)}")
            for col, value in zip(self.columns, row):
                if not _check_cell(col, value):
                    raise DataError(
                        f"table {self.name!r} row {i} column {col.name!r}: "
                        f"{value!r} is not a valid {col.kind}"
                    )

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise DataError(f"table {self.name!r} has no column {name!r}")

    def column(self, name: str) -> list:
        j = self.index(name)
        return [row[j] for row in self.rows]

    def records(self) -> list[dict]:
        names = self.column_names
        return [dict(zip(names, row)) for row in self.rows]

    def where(self, keep: Callable[[dict], bool]) -> "Table":
        names = self.column_names
        rows = [row for row in self.rows if keep(dict(zip(names, row)))]
        return Table(self.name, self.columns, rows)

    def count_missing(self) -> int:
        return sum(v is None for row in self.rows for v in row)


# --- CSV ---------------------------------------------------------------------


def _format_cell(col: Column, value: Any) -> str:
    if value is None:
        return ""
    kind = col.kind
    if kind == "boolean":
        return "true" if value else "false"
    if kind == "float":
        return repr(float(value))
    if kind == "integer":
        return str(int(value))
    if kind == "date":
        return value.isoformat()
    if kind == "time":
        return value.strftime("%H:%M:%S")
    return value


def _parse_cell(col: Column, text: str) -> Any:
    if text == "":
        return None
    kind = col.kind
    if kind in ("identifier", "categorical"):
        if col.levels is not None and text not in col.levels:
            raise ValueError(f"not one of {list(col.levels)}")
        return text
    if kind == "boolean":
        if text == "true":
            return True
        if text == "false":
            return False
        raise ValueError("expected 'true' or 'false'")
    if kind == "integer":
        return int(text)
    if kind == "float":
        return float(text)
    if kind == "date":
        return dt.date.fromisoformat(text)
    if kind == "time":
        return dt.datetime.strptime(text, "%H:%M:%S").time()
    raise ValueError(kind)


def load_csv(path: str | Path, schema: Sequence[Column], name: str | None = None) -> Table:
    """Read a CSV file whose header matches ``schema`` exactly.

    Empty cells become ``None``. Unparseable cells raise :class:`DataError`
    naming the row, column and offending text.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such CSV file: {path}")
    schema = tuple(schema)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: missing header row") from None
        expected = [c.name for c in schema]
        if header != expected:
            raise DataError(f"{path}: header {header} does not match schema {expected}")
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if len(raw) != len(schema):
                raise DataError(f"{path} line {lineno}: expected {len(schema)} cells, got {len(raw)}")
            row = []
            for col, text in zip(schema, raw):
                try:
                    row.append(_parse_cell(col, text))
                except ValueError as exc:
                    raise DataError(
                        f"{path} line {lineno}, column {col.name!r}: cannot parse {text!r} ({exc})"
                    ) from None
            rows.append(tuple(row))
    return Table(name or path.stem, schema, rows)


def dumps_csv(table: Table) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(table.column_names)
    for row in table.rows:
        writer.writerow([_format_cell(c, v) for c, v in zip(table.columns, row)])
    return buf.getvalue()


def write_csv(table: Table, path: str | Path) -> None:
    Path(path).write_text(dumps_csv(table), encoding="utf-8", newline="")


# --- labeled datasets --------------------------------------------------------


def _frozen(a) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    features: np.ndarray
    feature_names: tuple[str, ...]
    labels: np.ndarray
    protected: np.ndarray
    weights: np.ndarray = None
    group_ids: np.ndarray = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim != 2:
            raise DataError("features must be a 2-d matrix")
        n = X.shape[0]
        weights = np.ones(n) if self.weights is None else np.asarray(self.weights, dtype=float)
        groups = np.arange(n).astype(str) if self.group_ids is None else np.asarray(self.group_ids)
        labels = np.asarray(self.labels)
        protected = np.asarray(self.protected)
        for name, v in (("labels", labels), ("protected", protected), ("weights", weights), ("group_ids", groups)):
            if v.shape != (n,):
                raise DataError(f"{name} has shape {v.shape}, expected ({n},)")
        if len(self.feature_names) != X.shape[1]:
            raise DataError("feature_names length does not match feature matrix width")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise DataError("feature_names are not unique")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain missing or non-finite values")
        for name, v in (("labels", labels), ("protected", protected)):
            if not np.all((v == 0) | (v == 1)):
                raise DataError(f"{name} must contain only 0 or 1")
        if not (np.all(np.isfinite(weights)) and np.all(weights > 0)):
            raise DataError("weights must be strictly positive and finite")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "labels", _frozen(labels.astype(np.int8)))
        object.__setattr__(self, "protected", _frozen(protected.astype(np.int8)))
        object.__setattr__(self, "weights", _frozen(weights))
        object.__setattr__(self, "group_ids", _frozen(groups))

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "LabeledDataset":
        rows = np.asarray(rows)
        return LabeledDataset(
            self.features[rows],
            self.feature_names,
            self.labels[rows],
            self.protected[rows],
            self.weights[rows],
            self.group_ids[rows],
        )

    def with_weights(self, weights) -> "LabeledDataset":
        return LabeledDataset(
            self.features, self.feature_names, self.labels, self.protected, weights, self.group_ids
        )

    def drop_features(self, names: Iterable[str]) -> "LabeledDataset":
        names = set(names)
        unknown = names - set(self.feature_names)
        if unknown:
            raise DataError(f"unknown features: {sorted(unknown)}")
        keep = [i for i, f in enumerate(self.feature_names) if f not in names]
        return LabeledDataset(
            self.features[:, keep],
            [self.feature_names[i] for i in keep],
            self.labels,
            self.protected,
            self.weights,
            self.group_ids,
        )


_NUMERIC_KINDS = ("boolean", "integer", "float")


def to_labeled(
    table: Table,
    label_col: str,
    protected_col: str,
    group_col: str,
    privileged_value: Any,
    favourable_value: Any,
) -> LabeledDataset:
    """Turn a table into a :class:`LabeledDataset`.

    ``favourable_value`` is either the cell value meaning the favourable
    outcome or a predicate on the cell (e.g. ``lambda dose: dose > 0`` for a
    numeric column the target is derived from). Every other column becomes a
    float feature; booleans encode as 0/1. Categorical, date, time and
    identifier columns cannot be features.
    """
    for name in (label_col, protected_col, group_col):
        table.index(name)
    special = {label_col, protected_col, group_col}

    def binary(col: str, positive) -> np.ndarray:
        values = table.column(col)
        if any(v is None for v in values):
            raise DataError(f"column {col!r} has missing cells")
        if callable(positive):
            out = np.array([1 if positive(v) else 0 for v in values], dtype=np.int8)
            if len(values) and len(set(out.tolist())) != 2:
                raise DataError(f"column {col!r} yields a single outcome")
            return out
        distinct = set(values)
        if len(distinct) > 2:
            raise DataError(f"column {col!r} has more than two distinct values: {sorted(map(str, distinct))}")
        if len(values) and len(distinct) != 2:
            raise DataError(f"column {col!r} has only one distinct value {next(iter(distinct))!r}")
        if len(values) and positive not in distinct:
            raise DataError(f"value {positive!r} not found in column {col!r}")
        return np.array([1 if v == positive else 0 for v in values], dtype=np.int8)

    labels = binary(label_col, favourable_value)
    protected = binary(protected_col, privileged_value)
    groups = table.column(group_col)
    if any(g is None for g in groups):
        raise DataError(f"column {group_col!r} has missing cells")

    feat_idx, feat_names = [], []
    for j, col in enumerate(table.columns):
        if col.name in special:
            continue
        if col.kind not in _NUMERIC_KINDS:
            raise DataError(f"column {col.name!r} of kind {col.kind} cannot be used as a feature")
        feat_idx.append(j)
        feat_names.append(col.name)
    X = np.empty((table.n_rows, len(feat_idx)))
    for i, row in enumerate(table.rows):
        for k, j in enumerate(feat_idx):
            v = row[j]
            if v is None:
                raise DataError(f"row {i} column {table.columns[j].name!r}: missing feature value")
            X[i, k] = float(v)
    return LabeledDataset(X, feat_names, labels, protected, None, np.array([str(g) for g in groups]))


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple[float, ...]
    seed: int = 0

    def __post_init__(self):
        fr = tuple(float(f) for f in self.fractions)
        if not fr or any(not (f > 0) for f in fr):
            raise DataError("split fractions must be positive")
        if abs(math.fsum(fr) - 1.0) > 1e-9:
            raise DataError(f"split fractions sum to {math.fsum(fr)}, not 1")
        if int(self.seed) < 0:
            raise DataError("seed must be unsigned")
        object.__setattr__(self, "fractions", fr)


def group_partition(group_ids, spec: SplitSpec) -> list[np.ndarray]:
    """Row indices of each partition; whole groups go to one partition.

    Groups are shuffled with the seed, then each is handed to the partition
    with the largest remaining row deficit (ties to the lowest index).
    """
    group_ids = np.asarray(group_ids)
    uniq, inverse, sizes = np.unique(group_ids, return_inverse=True, return_counts=True)
    k = len(spec.fractions)
    if len(uniq) < k:
        raise DataError(f"{len(uniq)} distinct groups cannot fill {k} partitions")
    order = np.random.default_rng(spec.seed).permutation(len(uniq))
    targets = np.array(spec.fractions) * len(group_ids)
    filled = np.zeros(k)
    counts = np.zeros(k, dtype=int)
    assign = np.empty(len(uniq), dtype=int)
    for pos, g in enumerate(order):
        empty = np.flatnonzero(counts == 0)
        if len(order) - pos == len(empty):
            p = int(empty[0])
        else:
            p = int(np.argmax(targets - filled))
        assign[g] = p
        filled[p] += sizes[g]
        counts[p] += 1
    row_part = assign[inverse]
    return [np.flatnonzero(row_part == p) for p in range(k)]


def split_disjoint_groups(ds: LabeledDataset, spec: SplitSpec) -> list[LabeledDataset]:
    return [ds.subset(rows) for rows in group_partition(ds.group_ids, spec)]
