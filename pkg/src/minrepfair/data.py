"""Loading and preprocessing of tabular datasets with a sensitive attribute."""

from __future__ import annotations

import csv
import gzip
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class Schema:
    """Column roles for a CSV file.

    ``group_map`` renames sensitive values to group names (e.g. collapsing
    every non-white race into ``"nonwhite"``); values missing from the map
    fall back to ``group_default`` when it is set, otherwise keep their own
    name.
    """

    sensitive: str
    target: Optional[str] = None
    categorical: Sequence[str] = ()
    drop: Sequence[str] = ()
    group_map: Optional[dict] = None
    group_default: Optional[str] = None
    na_values: Sequence[str] = ("",)
    delimiter: str = ","

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown schema keys: {sorted(unknown)}")
        return cls(**d)

    def group_of(self, value):
        if self.group_map is not None and value in self.group_map:
            return self.group_map[value]
        if self.group_default is not None and self.group_map is not None:
            return self.group_default
        return value


@dataclass
class RawTable:
    columns: list
    rows: list
    sensitive: str
    target: Optional[str] = None
    schema: Optional[Schema] = None

    def __post_init__(self):
        if self.sensitive not in self.columns:
            raise ValueError(f"missing column: {self.sensitive!r}")
        if self.target is not None and self.target not in self.columns:
            raise ValueError(f"missing column: {self.target!r}")
        width = len(self.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise ValueError(f"ragged row {i}: {len(row)} cells, expected {width}")

    def column(self, name):
        j = self.columns.index(name)
        return [row[j] for row in self.rows]


@dataclass
class Dataset:
    """Numeric feature matrix plus (possibly overlapping) group index sets."""

    points: np.ndarray
    groups: list
    group_names: list
    feature_names: list = field(default_factory=list)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2:
            raise ValueError("points must be a 2-d array")
        n = self.points.shape[0]
        self.groups = [np.asarray(g, dtype=np.int64) for g in self.groups]
        for g in self.groups:
            if g.size and (g.min() < 0 or g.max() >= n):
                raise ValueError("group index out of range")
        if len(self.group_names) != len(self.groups):
            raise ValueError("one name per group required")

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def m(self):
        return self.points.shape[1]

    @property
    def num_groups(self):
        return len(self.groups)

    def membership(self):
        """Boolean (num_groups, n) matrix."""
        mask = np.zeros((self.num_groups, self.n), dtype=bool)
        for g, idx in enumerate(self.groups):
            mask[g, idx] = True
        return mask

    def groups_disjoint(self):
        return bool(np.all(self.membership().sum(axis=0) <= 1))


def _open_text(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rt", newline="")
    return open(path, newline="")


def load_csv(path, schema: Schema) -> RawTable:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing file: {path}")
    with _open_text(path) as f:
        reader = csv.reader(f, delimiter=schema.delimiter, skipinitialspace=True)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: no header row") from None
        for name in [schema.sensitive, schema.target, *schema.categorical, *schema.drop]:
            if name is not None and name not in header:
                raise ValueError(f"missing column: {name!r}")
        na = set(schema.na_values)
        rows, dropped = [], 0
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            row = [c.strip() for c in row]
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: ragged row ({len(row)} cells, expected {len(header)})")
            if any(c in na for c in row):
                dropped += 1
                continue
            rows.append(row)
    if dropped:
        log.warning("%s: dropped %d rows with missing cells", path, dropped)
    return RawTable(header, rows, schema.sensitive, schema.target, schema)


def _is_numeric(values):
    try:
        for v in values:
            float(v)
    except ValueError:
        return False
    return True


def minmax(col):
    col = np.asarray(col, dtype=float)
    lo, hi = col.min(), col.max()
    if hi == lo:
        return np.zeros_like(col)
    return (col - lo) / (hi - lo)


def preprocess(raw: RawTable) -> Dataset:
    if not raw.rows:
        raise ValueError("cannot preprocess a table with zero rows")
    schema = raw.schema or Schema(sensitive=raw.sensitive, target=raw.target)
    skip = {raw.sensitive, raw.target, *schema.drop}
    forced_cat = set(schema.categorical)

    feats, names = [], []
    for j, name in enumerate(raw.columns):
        if name in skip:
            continue
        values = [row[j] for row in raw.rows]
        if name not in forced_cat and _is_numeric(values):
            feats.append(minmax([float(v) for v in values]))
            names.append(name)
            continue
        # one indicator column per distinct value, in order of first appearance
        levels = list(dict.fromkeys(values))
        codes = {v: i for i, v in enumerate(levels)}
        idx = np.fromiter((codes[v] for v in values), dtype=np.int64, count=len(values))
        onehot = np.zeros((len(values), len(levels)))
        onehot[np.arange(len(values)), idx] = 1.0
        feats.extend(onehot.T)
        names.extend(f"{name}={v}" for v in levels)

    n = len(raw.rows)
    points = np.column_stack(feats) if feats else np.zeros((n, 0))

    labels = [schema.group_of(v) for v in raw.column(raw.sensitive)]
    group_names = list(dict.fromkeys(labels))
    gid = {g: i for i, g in enumerate(group_names)}
    lab = np.fromiter((gid[v] for v in labels), dtype=np.int64, count=n)
    groups = [np.flatnonzero(lab == g) for g in range(len(group_names))]
    return Dataset(points, groups, group_names, names)


def subsample(ds: Dataset, size: int, seed: int) -> Dataset:
    if size < 1:
        raise ValueError("size must be >= 1")
    if size >= ds.n:
        return ds
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(ds.n, size=size, replace=False))
    new_index = np.full(ds.n, -1, dtype=np.int64)
    new_index[keep] = np.arange(size)
    groups = []
    for g in ds.groups:
        mapped = new_index[g]
        groups.append(np.sort(mapped[mapped >= 0]))
    return Dataset(ds.points[keep], groups, list(ds.group_names), list(ds.feature_names))


def load_dataset(path, schema: Schema) -> Dataset:
    return preprocess(load_csv(path, schema))


# Canned schemas for the fixtures under data/.
IRIS_SCHEMA = Schema(sensitive="species")
ADULT_SEX_SCHEMA = Schema(sensitive="sex", target="income")
ADULT_RACE_SCHEMA = Schema(sensitive="race", target="income",
                           group_map={"White": "white"}, group_default="nonwhite")
