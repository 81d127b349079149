"""Feature-by-sample matrices with group labels and missing values.

File layout (``features_in_rows``, the default)::

    feature,A,A,B,B        <- header: corner cell, then one group label per sample
    g1,0.1,0.4,NA,2.5
    g2,...

With ``features_in_cols`` the table is transposed: the header carries the
feature ids and the first column carries each sample's group label.  Empty
cells and ``NA``/``nan`` (any case) are missing.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .core import GroupSample

__all__ = [
    "FeatureMatrix",
    "LoadError",
    "FeatureSkipped",
    "load_matrix",
    "write_matrix",
    "feature_groups",
    "MISSING_TOKENS",
]

MISSING_TOKENS = frozenset({"", "na", "nan"})
FORMATS = {"csv": ",", "tsv": "\t"}
ORIENTATIONS = ("features_in_rows", "features_in_cols")


class LoadError(ValueError):
    """Malformed or unreadable input file."""


class FeatureSkipped(Exception):
    """A feature cannot be scored (e.g. fewer than two nonempty groups)."""

    def __init__(self, feature_id: str, reason: str):
        super().__init__(f"{feature_id}: {reason}")
        self.feature_id = feature_id
        self.reason = reason


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Features x samples values; ``missing`` marks absent cells (stored as NaN)."""

    feature_ids: tuple[str, ...]
    group_labels: tuple[str, ...]
    values: np.ndarray
    missing: np.ndarray

    def __post_init__(self):
        ids = tuple(str(f) for f in self.feature_ids)
        labels = tuple(str(g) for g in self.group_labels)
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2 or values.shape != (len(ids), len(labels)):
            raise ValueError(
                f"values have shape {values.shape}, expected ({len(ids)}, {len(labels)})"
            )
        missing = np.asarray(self.missing, dtype=bool) | np.isnan(values)
        if len(set(ids)) != len(ids):
            dup = next(f for f in ids if ids.count(f) > 1)
            raise ValueError(f"duplicate feature id {dup!r}")
        if len(set(labels)) < 2:
            raise ValueError(f"need at least 2 distinct groups, got {sorted(set(labels))}")
        if np.any(~np.isfinite(values[~missing])):
            raise ValueError("values must be finite where not missing")
        values[missing] = np.nan
        values.setflags(write=False)
        missing = missing.copy()
        missing.setflags(write=False)
        object.__setattr__(self, "feature_ids", ids)
        object.__setattr__(self, "group_labels", labels)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing", missing)
        object.__setattr__(self, "_index", {f: i for i, f in enumerate(ids)})

    @classmethod
    def from_array(cls, values, group_labels, feature_ids=None) -> "FeatureMatrix":
        values = np.asarray(values, dtype=float)
        if feature_ids is None:
            width = len(str(values.shape[0]))
            feature_ids = [f"f{i:0{width}d}" for i in range(values.shape[0])]
        return cls(tuple(feature_ids), tuple(group_labels), values, np.isnan(values))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def groups(self) -> tuple[str, ...]:
        """Distinct group labels in order of first appearance."""
        return tuple(dict.fromkeys(self.group_labels))

    def group_columns(self) -> dict[str, np.ndarray]:
        labels = np.asarray(self.group_labels)
        return {g: np.flatnonzero(labels == g) for g in self.groups}

    def group_sizes(self) -> dict[str, int]:
        return {g: len(cols) for g, cols in self.group_columns().items()}

    def index(self, feature_id: str) -> int:
        try:
            return self._index[feature_id]
        except KeyError:
            raise KeyError(f"unknown feature {feature_id!r}") from None

    def select_columns(self, columns) -> "FeatureMatrix":
        cols = np.asarray(columns, dtype=np.intp)
        return FeatureMatrix(
            self.feature_ids,
            tuple(self.group_labels[c] for c in cols),
            self.values[:, cols],
            self.missing[:, cols],
        )

    def select_features(self, feature_ids) -> "FeatureMatrix":
        rows = [self.index(f) for f in feature_ids]
        return FeatureMatrix(
            tuple(feature_ids), self.group_labels, self.values[rows], self.missing[rows]
        )


def _parse_cell(cell: str, where: str) -> float:
    token = cell.strip()
    if token.lower() in MISSING_TOKENS:
        return math.nan
    try:
        value = float(token)
    except ValueError:
        raise LoadError(f"{where}: cannot parse {cell!r} as a number") from None
    if not math.isfinite(value):
        raise LoadError(f"{where}: non-finite value {cell!r}")
    return value


def _check_format(fmt: str, orientation: str) -> str:
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {sorted(FORMATS)}, got {fmt!r}")
    if orientation not in ORIENTATIONS:
        raise ValueError(f"orientation must be one of {ORIENTATIONS}, got {orientation!r}")
    return FORMATS[fmt]


def load_matrix(path, format: str = "csv", orientation: str = "features_in_rows") -> FeatureMatrix:
    """Read a delimited feature matrix; see the module docstring for layout.

    Errors carry the 1-based line (and column) where parsing failed.
    """
    delim = _check_format(format, orientation)
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise LoadError(f"{path}: cannot read file ({exc})") from exc

    rows = [r for r in csv.reader(io.StringIO(text), delimiter=delim)]
    numbered = [(n, r) for n, r in enumerate(rows, start=1) if any(c.strip() for c in r)]
    if len(numbered) < 2:
        raise LoadError(f"{path}: need a header row and at least one data row")
    (_, header), body = numbered[0], numbered[1:]
    width = len(header)
    names, cells = [], []
    for lineno, row in body:
        if len(row) != width:
            raise LoadError(f"{path}: line {lineno} has {len(row)} fields, header has {width}")
        names.append(row[0].strip())
        cells.append(
            [_parse_cell(c, f"{path}: line {lineno}, column {k}") for k, c in enumerate(row[1:], start=2)]
        )
    values = np.array(cells, dtype=float).reshape(len(body), width - 1)
    header_items = [h.strip() for h in header[1:]]

    if orientation == "features_in_rows":
        feature_ids, labels = names, header_items
    else:
        feature_ids, labels, values = header_items, names, values.T
    if any(not lab for lab in labels):
        raise LoadError(f"{path}: every sample needs a group label")
    seen = set()
    for f in feature_ids:
        if f in seen:
            raise LoadError(f"{path}: duplicate feature id {f!r}")
        seen.add(f)
    try:
        return FeatureMatrix(tuple(feature_ids), tuple(labels), values, np.isnan(values))
    except ValueError as exc:
        raise LoadError(f"{path}: {exc}") from exc


def write_matrix(matrix: FeatureMatrix, path, format: str = "csv",
                 orientation: str = "features_in_rows", corner: str = "feature") -> None:
    """Write ``matrix`` in the layout :func:`load_matrix` reads; values round-trip exactly."""
    delim = _check_format(format, orientation)

    def fmt(v, miss):
        return "NA" if miss else repr(float(v))

    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter=delim, lineterminator="\n")
        if orientation == "features_in_rows":
            w.writerow([corner, *matrix.group_labels])
            for fid, row, miss in zip(matrix.feature_ids, matrix.values, matrix.missing):
                w.writerow([fid, *(fmt(v, m) for v, m in zip(row, miss))])
        else:
            w.writerow([corner, *matrix.feature_ids])
            for label, col, miss in zip(matrix.group_labels, matrix.values.T, matrix.missing.T):
                w.writerow([label, *(fmt(v, m) for v, m in zip(col, miss))])


def _quantile_for(q, group: str) -> float:
    if isinstance(q, Mapping):
        try:
            return float(q[group])
        except KeyError:
            raise ValueError(f"no quantile level given for group {group!r}") from None
    return float(q)


def feature_groups(matrix: FeatureMatrix, feature: str, q: float | Mapping[str, float] = 0.5,
                   _columns: dict[str, np.ndarray] | None = None) -> list[GroupSample]:
    """Per-group sorted, non-missing values of one feature.

    Groups left empty by missing values are dropped; raises
    :class:`FeatureSkipped` if fewer than two groups remain.
    """
    row = matrix.values[matrix.index(feature)]
    columns = _columns if _columns is not None else matrix.group_columns()
    out = []
    for group, cols in columns.items():
        vals = row[cols]
        vals = np.sort(vals[~np.isnan(vals)])
        if vals.size:
            out.append(GroupSample(vals, _quantile_for(q, group), group))
    if len(out) < 2:
        raise FeatureSkipped(feature, f"only {len(out)} group(s) with observed values")
    return out
