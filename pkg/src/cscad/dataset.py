"""Dataset ingestion: CSV loading, mixed-type encoding, splitting, windowing.

Continuous columns are z-scored with statistics taken from the data the
encoder was fitted on; discrete columns are one-hot expanded. Encoding is a
fitted transform so that test rows are normalized with train statistics.
"""

import csv
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import (
    ConstantColumnWarning,
    DegenerateSplit,
    MissingColumn,
    SeriesTooShort,
    UnknownCategory,
    UnparsableNumber,
)
from .schema import CONTINUOUS, DISCRETE
from .validation import check_is_fitted


@dataclass
class RawTable:
    """Columnar table straight from a CSV: floats for continuous columns,
    category strings for discrete ones, raw label strings if declared."""

    columns: dict
    n_rows: int
    labels: list = None

    def subset(self, indices):
        cols = {name: [vals[i] for i in indices] for name, vals in self.columns.items()}
        labels = [self.labels[i] for i in indices] if self.labels is not None else None
        return RawTable(cols, len(indices), labels)


@dataclass
class EncodedMatrix:
    """One-hot-expanded, z-scored sample matrix.

    feature_map gives, per encoded dimension, the source column name and the
    source category (None for continuous dimensions). ids are row identities
    that survive splitting, so predictions can be joined back to the input.
    """

    values: np.ndarray
    feature_map: tuple
    norm_stats: dict
    labels: np.ndarray = None
    ids: np.ndarray = None

    @property
    def n_samples(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    def subset(self, indices):
        indices = np.asarray(indices)
        return EncodedMatrix(
            values=self.values[indices],
            feature_map=self.feature_map,
            norm_stats=self.norm_stats,
            labels=None if self.labels is None else self.labels[indices],
            ids=None if self.ids is None else self.ids[indices],
        )


@dataclass
class WindowedSeries:
    """Sliding windows over consecutive time steps plus the step after each
    window, which is what the time-series model reconstructs."""

    windows: np.ndarray
    targets: np.ndarray
    k: int
    target_ids: np.ndarray = None
    target_labels: np.ndarray = None

    @property
    def n_samples(self):
        return self.windows.shape[0]


def load_csv(path, schema):
    """Read and validate a CSV against the schema.

    Continuous cells are parsed to float here; discrete cells must be one of
    the declared categories. Missing values are rejected.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        positions = {}
        wanted = list(schema.feature_names)
        if schema.label_column is not None:
            wanted.append(schema.label_column)
        for name in wanted:
            if name not in header:
                raise MissingColumn(f"{path}: column {name!r} not in header")
            positions[name] = header.index(name)

        columns = {name: [] for name in schema.feature_names}
        labels = [] if schema.label_column is not None else None
        n_rows = 0
        for row_idx, row in enumerate(reader):
            if not row or all(not cell.strip() for cell in row):
                continue
            for col in schema.columns:
                cell = row[positions[col.name]].strip()
                if col.kind == CONTINUOUS:
                    try:
                        value = float(cell)
                    except ValueError:
                        raise UnparsableNumber(row_idx, col.name, cell) from None
                    if not np.isfinite(value):
                        raise UnparsableNumber(row_idx, col.name, cell)
                    columns[col.name].append(value)
                else:
                    if cell not in col.categories:
                        raise UnknownCategory(row_idx, col.name, cell)
                    columns[col.name].append(cell)
            if labels is not None:
                labels.append(row[positions[schema.label_column]].strip())
            n_rows += 1
    if n_rows == 0:
        raise MissingColumn(f"{path}: no data rows")
    return RawTable(columns, n_rows, labels)


class MixedTypeEncoder(TransformerMixin, BaseEstimator):
    """Fit normalization statistics on one table, apply them to any other.

    Continuous columns are z-scored with the fitted mean and sample standard
    deviation; a constant column encodes to zeros (with a warning at fit
    time). Discrete columns expand to one-hot groups in schema category
    order.
    """

    def __init__(self, schema):
        self.schema = schema

    def fit(self, table, y=None):
        stats = {}
        for col in self.schema.columns:
            if col.kind != CONTINUOUS:
                continue
            values = np.asarray(table.columns[col.name], dtype=np.float64)
            mean = float(values.mean())
            std = float(values.std(ddof=1)) if values.size > 1 else 0.0
            if std == 0.0:
                warnings.warn(
                    f"column {col.name!r} is constant; it will encode as zeros",
                    ConstantColumnWarning,
                    stacklevel=2,
                )
            stats[col.name] = (mean, std)
        self.stats_ = stats
        self.feature_map_ = tuple(
            (col.name, None) if col.kind == CONTINUOUS else (col.name, cat)
            for col in self.schema.columns
            for cat in ([None] if col.kind == CONTINUOUS else col.categories)
        )
        return self

    def transform(self, table):
        check_is_fitted(self, "stats_")
        n = table.n_rows
        out = np.zeros((n, len(self.feature_map_)), dtype=np.float64)
        pos = 0
        for col in self.schema.columns:
            if col.kind == CONTINUOUS:
                mean, std = self.stats_[col.name]
                values = np.asarray(table.columns[col.name], dtype=np.float64)
                out[:, pos] = (values - mean) / std if std > 0.0 else 0.0
                pos += 1
            else:
                index = {cat: j for j, cat in enumerate(col.categories)}
                states = np.fromiter(
                    (index[v] for v in table.columns[col.name]), dtype=np.int64, count=n
                )
                out[np.arange(n), pos + states] = 1.0
                pos += col.cardinality
        labels = None
        if table.labels is not None and self.schema.anomaly_value is not None:
            labels = np.asarray(
                [v == self.schema.anomaly_value for v in table.labels], dtype=bool
            )
        return EncodedMatrix(
            values=out,
            feature_map=self.feature_map_,
            norm_stats=dict(self.stats_),
            labels=labels,
            ids=np.arange(n, dtype=np.int64),
        )


def encode(table, schema):
    """Fit-and-transform shorthand for a single table."""
    return MixedTypeEncoder(schema).fit(table).transform(table)


def decode(matrix, schema):
    """Invert the encoding back to raw column values.

    Categorical values are recovered exactly from the one-hot groups;
    continuous values are de-normalized with the stored statistics.
    """
    out = {}
    pos = 0
    for col in schema.columns:
        if col.kind == CONTINUOUS:
            mean, std = matrix.norm_stats[col.name]
            out[col.name] = list(matrix.values[:, pos] * std + mean)
            pos += 1
        else:
            states = np.argmax(matrix.values[:, pos : pos + col.cardinality], axis=1)
            out[col.name] = [col.categories[s] for s in states]
            pos += col.cardinality
    return out


def raw_feature_columns(matrix, schema):
    """Recover one numeric column per raw feature from the encoded matrix.

    Continuous features keep their z-scored values; each one-hot group
    collapses back to integer state codes. Correlation mining runs on these,
    treating a categorical feature as one variable rather than a group.
    """
    out = []
    pos = 0
    for col in schema.columns:
        if col.kind == CONTINUOUS:
            out.append((col.name, CONTINUOUS, 0, matrix.values[:, pos].copy()))
            pos += 1
        else:
            states = np.argmax(matrix.values[:, pos : pos + col.cardinality], axis=1)
            out.append((col.name, DISCRETE, col.cardinality, states.astype(np.float64)))
            pos += col.cardinality
    return out


def split_indices(n, train_fraction, seed):
    """Random row partition: floor(n * f) rows to train, the rest to test."""
    if not 0.0 < train_fraction < 1.0:
        raise DegenerateSplit(f"train fraction {train_fraction} outside (0, 1)")
    if n < 2:
        raise DegenerateSplit("need at least 2 rows to split")
    n_train = int(np.floor(n * train_fraction))
    if n_train == 0 or n_train == n:
        raise DegenerateSplit(f"fraction {train_fraction} leaves an empty side for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def split_indices_temporal(n, train_fraction):
    """Prefix/suffix partition for time series; no shuffling across time."""
    if not 0.0 < train_fraction < 1.0:
        raise DegenerateSplit(f"train fraction {train_fraction} outside (0, 1)")
    n_train = int(np.floor(n * train_fraction))
    if n_train == 0 or n_train == n:
        raise DegenerateSplit(f"fraction {train_fraction} leaves an empty side for n={n}")
    return np.arange(n_train), np.arange(n_train, n)


def split(matrix, train_fraction, seed):
    """Split an encoded matrix into disjoint train/test parts."""
    train_idx, test_idx = split_indices(matrix.n_samples, train_fraction, seed)
    return matrix.subset(train_idx), matrix.subset(test_idx)


def make_windows(matrix, k):
    """Cut an encoded series into contiguous k-step windows.

    Window i covers rows i..i+k-1 and its target is row i+k, so there are
    N - k windows and the temporal order is preserved.
    """
    n = matrix.n_samples
    if k < 1:
        raise SeriesTooShort(f"window length {k} must be >= 1")
    if n <= k:
        raise SeriesTooShort(f"{n} rows cannot fill a window of {k} steps plus a target")
    count = n - k
    windows = np.stack([matrix.values[i : i + k] for i in range(count)])
    targets = matrix.values[k:]
    return WindowedSeries(
        windows=windows,
        targets=targets,
        k=k,
        target_ids=None if matrix.ids is None else matrix.ids[k:],
        target_labels=None if matrix.labels is None else matrix.labels[k:],
    )
