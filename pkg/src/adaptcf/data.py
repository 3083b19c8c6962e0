"""Datasets, CSV ingestion and the synthetic generators used by the experiments."""

import csv
import math
import os
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .rng import Stream


class Task(str, Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"


class DataError(ValueError):
    """Raised for malformed input data."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labeled samples.

    ``labels`` holds integer class indices for classification and real targets
    for regression. Arrays are copied and made read-only on construction.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple = ()
    task: Task = Task.CLASSIFICATION

    def __post_init__(self):
        task = Task(self.task)
        X = np.array(self.features, dtype=np.float64, copy=True)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, len(self.feature_names))
        if X.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        y = np.array(self.labels, copy=True)
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DataError(
                f"features have {X.shape[0]} rows but labels have {y.size} entries")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain NaN or Inf")
        if task is Task.CLASSIFICATION:
            if y.size and not np.all(np.isfinite(y.astype(np.float64))):
                raise DataError("labels contain NaN or Inf")
            yi = y.astype(np.int64)
            if y.size and (np.any(yi != y) or yi.min() < 0):
                raise DataError("classification labels must be non-negative integers")
            y = yi
        else:
            y = y.astype(np.float64)
            if not np.all(np.isfinite(y)):
                raise DataError("labels contain NaN or Inf")
        names = tuple(str(n) for n in self.feature_names) or tuple(
            f"x{i}" for i in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DataError(
                f"{len(names)} feature names for {X.shape[1]} feature columns")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "task", task)

    def __len__(self):
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        if self.task is not Task.CLASSIFICATION:
            raise DataError("regression data has no classes")
        return int(self.labels.max()) + 1 if len(self) else 0

    def feature_index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise DataError(f"unknown feature {name!r}") from None

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.intp)
        return Dataset(self.features[rows], self.labels[rows], self.feature_names, self.task)

    def concat(self, other: "Dataset") -> "Dataset":
        if other.feature_names != self.feature_names or other.task is not self.task:
            raise DataError("cannot concatenate datasets with different schemas")
        return Dataset(np.vstack([self.features, other.features]),
                       np.concatenate([self.labels, other.labels]),
                       self.feature_names, self.task)


def load_csv(path, label_column: str, task=Task.CLASSIFICATION) -> Dataset:
    """Read a comma-separated file with a header row into a :class:`Dataset`."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise DataError(f"empty file: {path}")
    header = [h.strip() for h in rows[0]]
    hits = [i for i, h in enumerate(header) if h == label_column]
    if not hits:
        raise DataError(f"label column not found: {label_column!r}")
    if len(hits) > 1:
        raise DataError(f"duplicate label column: {label_column!r}")
    li = hits[0]
    names = [h for i, h in enumerate(header) if i != li]
    feats, labels = [], []
    # data rows are numbered from 1, the header is row 0
    for r, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise DataError(f"row {r}: expected {len(header)} cells, got {len(row)}")
        vals = []
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(
                    f"row {r}, column {header[c]}: cannot parse {cell!r} as a number") from None
            if not math.isfinite(v):
                raise DataError(f"row {r}, column {header[c]}: non-finite value {cell!r}")
            vals.append(v)
        labels.append(vals.pop(li))
        feats.append(vals)
    X = np.array(feats, dtype=np.float64).reshape(len(feats), len(names))
    task = Task(task)
    if task is Task.CLASSIFICATION:
        y = np.array(labels)
        if np.any(y != np.round(y)):
            raise DataError("classification labels must be integers")
        labels = y.astype(np.int64)
    return Dataset(X, labels, tuple(names), task)


def _fmt(v) -> str:
    # repr gives the shortest string that round-trips a double
    return repr(float(v))


def write_csv(data: Dataset, path, label_column: str = "y") -> None:
    """Write ``data`` so that :func:`load_csv` reproduces it exactly."""
    if label_column in data.feature_names:
        raise DataError(f"label column {label_column!r} clashes with a feature name")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(data.feature_names) + [label_column])
        for row, label in zip(data.features, data.labels):
            lab = str(int(label)) if data.task is Task.CLASSIFICATION else _fmt(label)
            w.writerow([_fmt(v) for v in row] + [lab])
    os.replace(tmp, path)


def split_by_threshold(data: Dataset, feature: str, threshold: float):
    """Partition rows into (feature <= threshold, feature > threshold)."""
    j = data.feature_index(feature)
    low = data.features[:, j] <= threshold
    return data.subset(np.flatnonzero(low)), data.subset(np.flatnonzero(~low))


@dataclass(frozen=True)
class BlobSpec:
    """Two-batch, two-class Gaussian blobs.

    ``means[b][c]`` is the mean of class ``c`` in batch ``b``. Evaluation
    points are drawn uniformly from the strip joining the two class means of
    the second batch, ``eval_halfwidth`` wide on either side of the segment.
    """

    means: tuple = (((-2.0, 0.0), (2.0, 0.0)),
                    ((-2.0, -2.0), (2.0, 2.0)))
    variance: float = 1.0
    samples_per_class: int = 100
    seed: int = 42
    eval_samples: int = 200
    eval_halfwidth: float = 1.0

    def __post_init__(self):
        m = np.asarray(self.means, dtype=np.float64)
        if m.shape != (2, 2, 2):
            raise DataError("blobs need exactly 2 batches x 2 classes x 2 features")
        if not self.variance > 0:
            raise DataError("variance must be positive")
        if self.samples_per_class < 1 or self.eval_samples < 0:
            raise DataError("sample counts must be positive")
        if self.seed < 0:
            raise DataError("seed must be unsigned")
        object.__setattr__(self, "means", tuple(tuple(tuple(float(v) for v in c) for c in b) for b in m))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["means"] = [[list(c) for c in b] for b in self.means]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BlobSpec":
        d = dict(d)
        if "means" in d:
            d["means"] = tuple(tuple(tuple(c) for c in b) for b in d["means"])
        return cls(**d)


def generate_gaussian_blobs(spec: BlobSpec = BlobSpec()):
    """Return ``(batch1, batch2, eval)`` for ``spec``.

    Eval labels follow the Bayes rule of the second batch (nearest class mean,
    ties to class 1).
    """
    rs = Stream(spec.seed)
    sd = math.sqrt(spec.variance)
    names = ("x1", "x2")
    batches = []
    for batch_means in spec.means:
        X, y = [], []
        for c, mean in enumerate(batch_means):
            X.append(rs.normal(mean, sd, size=(spec.samples_per_class, 2)))
            y.append(np.full(spec.samples_per_class, c))
        batches.append(Dataset(np.vstack(X), np.concatenate(y), names))

    m0, m1 = (np.asarray(m) for m in spec.means[1])
    axis = m1 - m0
    normal = np.array([-axis[1], axis[0]]) / np.linalg.norm(axis)
    along = rs.uniform(0.0, 1.0, size=spec.eval_samples)
    across = rs.uniform(-spec.eval_halfwidth, spec.eval_halfwidth, size=spec.eval_samples)
    E = m0 + along[:, None] * axis + across[:, None] * normal
    d0 = np.sum((E - m0) ** 2, axis=1)
    d1 = np.sum((E - m1) ** 2, axis=1)
    batches.append(Dataset(E, (d1 <= d0).astype(np.int64), names))
    return tuple(batches)


@dataclass(frozen=True)
class CreditSpec:
    """Synthetic loan data: one ``amount`` feature plus noise features.

    In the first batch large amounts are rejected (label 0). In the second
    batch amounts above ``flip_above`` are accepted again, so a refit on both
    batches learns regions where raising the amount turns a rejection into an
    acceptance.
    """

    n_batch1: int = 300
    n_batch2: int = 500
    n_test: int = 200
    n_noise: int = 4
    amount_max: float = 10.0
    reject_above: float = 5.0
    batch2_reject_above: float = 4.0
    flip_above: float = 7.0
    seed: int = 7

    def to_dict(self) -> dict:
        return asdict(self)


def generate_credit_like(spec: CreditSpec = CreditSpec()):
    """Return ``(batch1, batch2, test)``; the test set mixes both regimes."""
    rs = Stream(spec.seed)
    names = ("amount",) + tuple(f"noise{i + 1}" for i in range(spec.n_noise))

    def draw(n):
        amount = rs.uniform(0.0, spec.amount_max, size=n)
        noise = rs.normal(0.0, 1.0, size=(n, spec.n_noise))
        return np.column_stack([amount, noise])

    def regime1(X):
        return (X[:, 0] <= spec.reject_above).astype(np.int64)

    def regime2(X):
        a = X[:, 0]
        return ((a <= spec.batch2_reject_above) | (a > spec.flip_above)).astype(np.int64)

    X1, X2 = draw(spec.n_batch1), draw(spec.n_batch2)
    T1, T2 = draw(spec.n_test // 2), draw(spec.n_test - spec.n_test // 2)
    test = Dataset(np.vstack([T1, T2]), np.concatenate([regime1(T1), regime2(T2)]), names)
    return Dataset(X1, regime1(X1), names), Dataset(X2, regime2(X2), names), test
