"""Compare the contrastive explanations two models give at the same points."""

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .counterfactuals import CfSolverConfig, CounterfactualError, counterfactual, default_target
from .data import Dataset, Task
from .models import Model, ModelError

ZERO_NORM = 1e-12


class DiffError(ValueError):
    pass


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DiffError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def psi_compare(delta_old, delta_new) -> np.ndarray:
    """Component-wise ``|delta_old - delta_new|``."""
    a, b = _pair(delta_old, delta_new)
    return np.abs(a - b)


def psi_euclid(delta_old, delta_new, p=2) -> float:
    a, b = _pair(delta_old, delta_new)
    return float(np.linalg.norm(a - b, ord=p))


def psi_cosine(delta_old, delta_new) -> float:
    a, b = _pair(delta_old, delta_new)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na <= ZERO_NORM or nb <= ZERO_NORM:
        raise DiffError("undefined angle: zero-norm explanation")
    # normalise first so positive rescaling of either argument cancels exactly
    ua, ub = a / na, b / nb
    if np.array_equal(ua, ub):
        return 1.0
    return float(np.clip(ua @ ub, -1.0, 1.0))


def explanation_delta(model: Model, x, target=None, config: CfSolverConfig = CfSolverConfig()):
    """Return ``(delta, result)`` from the solver suited to ``model``.

    ``target`` defaults to the opposite class for binary classifiers; it must
    be an :class:`Interval` for regression. When ``x`` already meets an
    interval target the delta is zero. Invalid counterfactuals are returned
    with ``result.valid`` false rather than raised.
    """
    x = np.asarray(x, dtype=np.float64)
    if target is None:
        target = default_target(model, x)
    res = counterfactual(model, x, target, config)
    return res.delta, res


@dataclass
class ExplanationDiff:
    index: int
    x: np.ndarray
    label: object
    delta_old: np.ndarray
    delta_new: np.ndarray
    psi: np.ndarray
    psi_euclid: float
    psi_cosine: Optional[float]
    both_valid: bool

    @property
    def cosine_defined(self) -> bool:
        return self.psi_cosine is not None

    def to_dict(self) -> dict:
        return {
            "index": self.index, "x": self.x.tolist(), "label": self.label,
            "delta_old": self.delta_old.tolist(), "delta_new": self.delta_new.tolist(),
            "psi": self.psi.tolist(), "psi_euclid": self.psi_euclid,
            "psi_cosine": self.psi_cosine, "both_valid": self.both_valid,
        }


@dataclass
class DiffReport:
    feature_names: tuple
    per_sample: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    mean_psi: np.ndarray = None
    mean_abs_delta_change: np.ndarray = None

    def __post_init__(self):
        d = len(self.feature_names)
        if self.per_sample:
            psi = np.array([e.psi for e in self.per_sample])
            change = np.array([np.abs(e.delta_new) - np.abs(e.delta_old) for e in self.per_sample])
            # fixed left-to-right summation keeps the aggregate bit-stable
            self.mean_psi = _sequential_mean(psi)
            self.mean_abs_delta_change = _sequential_mean(change)
        else:
            self.mean_psi = np.zeros(d)
            self.mean_abs_delta_change = np.zeros(d)

    def feature_ratio(self, num: int, den: int) -> float:
        return float(self.mean_psi[num] / self.mean_psi[den])

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "n_compared": len(self.per_sample),
            "n_skipped": len(self.skipped),
            "mean_psi": self.mean_psi.tolist(),
            "mean_abs_delta_change": self.mean_abs_delta_change.tolist(),
            "per_sample": [e.to_dict() for e in self.per_sample],
            "skipped": [{"index": i, "reason": r} for i, r in self.skipped],
        }

    def write_json(self, path) -> None:
        _atomic_write(path, json.dumps(self.to_dict(), indent=1) + "\n")

    def write_plot_data(self, path) -> None:
        """CSV with columns ``feature, mean_psi, mean_abs_change``."""
        rows = ["feature,mean_psi,mean_abs_change"]
        for name, a, b in zip(self.feature_names, self.mean_psi, self.mean_abs_delta_change):
            rows.append(f"{name},{float(a)!r},{float(b)!r}")
        _atomic_write(path, "\n".join(rows) + "\n")


def _sequential_mean(rows: np.ndarray) -> np.ndarray:
    acc = np.zeros(rows.shape[1])
    for r in rows:
        acc = acc + r
    return acc / rows.shape[0]


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _correct(model, x, y, task):
    if task is Task.REGRESSION:
        return True
    return model.predict(x) == y


def comparable_indices(h: Model, h_new: Model, data: Dataset) -> list:
    """Rows whose label both models predict (all rows for regression)."""
    if data.task is Task.REGRESSION:
        return list(range(len(data)))
    ok = (h.predict_batch(data.features) == data.labels) & \
        (h_new.predict_batch(data.features) == data.labels)
    return np.flatnonzero(ok).tolist()


def explain_model_differences(h: Model, h_new: Model, data: Dataset, target=None,
                              config: CfSolverConfig = CfSolverConfig(), indices=None) -> DiffReport:
    """Counterfactual deltas under both models at every point both predict correctly.

    For classification ``target=None`` asks each model for the opposite of
    the true label. For regression pass an :class:`Interval`; regression
    samples are not filtered. ``indices`` restricts the comparison to a subset
    of rows (e.g. a ranking), in the given order.
    """
    if h.n_features != h_new.n_features or h.is_classifier != h_new.is_classifier:
        raise DiffError("incompatible models: feature count or task differs")
    if h.n_features != data.n_features:
        raise DiffError("dataset does not match the models' feature count")
    if (data.task is Task.REGRESSION) == h.is_classifier:
        raise DiffError("dataset task does not match the models")
    rows = range(len(data)) if indices is None else [int(i) for i in indices]
    per_sample, skipped = [], []
    for i in rows:
        x, y = data.features[i], data.labels[i].item()
        if not _correct(h, x, y, data.task):
            skipped.append((i, "misclassified by old model"))
            continue
        if not _correct(h_new, x, y, data.task):
            skipped.append((i, "misclassified by new model"))
            continue
        tgt = target
        if tgt is None:
            if data.task is Task.REGRESSION:
                raise DiffError("regression comparisons need an Interval target")
            if h.n_classes != 2:
                raise DiffError("multiclass comparisons need an explicit target")
            tgt = 1 - y
        try:
            d_old, r_old = explanation_delta(h, x, tgt, config)
            d_new, r_new = explanation_delta(h_new, x, tgt, config)
        except (CounterfactualError, ModelError) as exc:
            skipped.append((i, f"counterfactual failed: {exc}"))
            continue
        if not (r_old.valid and r_new.valid):
            skipped.append((i, "invalid counterfactual"))
            continue
        try:
            cos = psi_cosine(d_old, d_new)
        except DiffError:
            cos = None
        per_sample.append(ExplanationDiff(i, np.array(x), y, d_old, d_new,
                                          psi_compare(d_old, d_new), psi_euclid(d_old, d_new),
                                          cos, True))
    return DiffReport(data.feature_names, per_sample, skipped)
