"""Model families, training, adaptation and JSON persistence.

The module-level functions dispatch on the model type; models themselves
are immutable once built.
"""

import json
import os
from pathlib import Path

import numpy as np

from ..data import Dataset, Task
from .base import (AdaptationConfig, ConvergenceWarning, Family, Model, ModelError,
                   NonDifferentiableError)
from .bayes import GaussianNB, adapt_gnb, fit_gnb
from .linear import (AffineModel, LinearClassifier, LinearRegression, LogisticRegression,
                     adapt_affine, fit_affine)
from .tree import DecisionTree, fit_tree

__all__ = [
    "AdaptationConfig", "ConvergenceWarning", "Family", "Model", "ModelError",
    "NonDifferentiableError", "GaussianNB", "LinearClassifier", "LinearRegression",
    "LogisticRegression", "DecisionTree", "fit", "predict", "decision_function",
    "gradient", "adapt", "adapt_weighted", "model_to_dict", "model_from_dict",
    "save_model", "load_model",
]

_CLASSES = {
    Family.LINEAR_CLASSIFIER: LinearClassifier,
    Family.LOGISTIC_REGRESSION: LogisticRegression,
    Family.LINEAR_REGRESSION: LinearRegression,
    Family.GAUSSIAN_NB: GaussianNB,
    Family.DECISION_TREE: DecisionTree,
}

FORMAT = "adaptcf-model"
FORMAT_VERSION = 1


def _check_task(family, data):
    regression = family is Family.LINEAR_REGRESSION
    if regression != (data.task is Task.REGRESSION):
        raise ModelError(f"{family.value} cannot be trained on {data.task.value} data")


def fit(family, data: Dataset, sample_weights=None, *, config=AdaptationConfig(),
        max_depth=6, min_samples_leaf=1) -> Model:
    """Train a model of ``family`` on ``data``.

    ``config`` supplies the optimiser settings for the gradient-trained
    families; ``max_depth`` and ``min_samples_leaf`` apply to trees only.
    """
    family = Family(family)
    _check_task(family, data)
    if len(data) == 0:
        raise ModelError("cannot fit on an empty dataset")
    if sample_weights is not None:
        sw = np.asarray(sample_weights, dtype=np.float64)
        if sw.shape != (len(data),):
            raise ModelError(f"expected {len(data)} sample weights, got shape {sw.shape}")
        if np.any(sw < 0) or not np.all(np.isfinite(sw)):
            raise ModelError("sample weights must be non-negative and finite")
        if sw.sum() == 0:
            raise ModelError("zero total sample weight")
        sample_weights = sw
    X, y = data.features, data.labels
    if data.task is Task.CLASSIFICATION:
        present = np.unique(y if sample_weights is None else y[sample_weights > 0])
        if present.size < 2:
            raise ModelError("classification data must contain at least two classes")
        if family in (Family.LINEAR_CLASSIFIER, Family.LOGISTIC_REGRESSION) and y.max() > 1:
            raise ModelError(f"{family.value} is binary; labels must be 0/1")
    if family is Family.GAUSSIAN_NB:
        return fit_gnb(X, y, sample_weights)
    if family is Family.DECISION_TREE:
        return fit_tree(X, y, sample_weights, max_depth=max_depth,
                        min_samples_leaf=min_samples_leaf)
    return fit_affine(_CLASSES[family], X, y, sample_weights, config)


def predict(model: Model, x):
    return model.predict(x)


def decision_function(model: Model, x, target=None) -> float:
    return model.decision_function(x, target)


def gradient(model: Model, x, target=None) -> np.ndarray:
    return model.gradient(x, target)


def adapt_weighted(model: Model, X, y, rel_weights, config: AdaptationConfig) -> Model:
    """Adapt ``model`` to samples carrying relative weights.

    Gradient-trained families minimise
    ``proximity * |theta - theta_old|^2 + C * sum_i rel_i * loss_i``;
    naive Bayes blends statistics of the weighted sample; trees refit on
    their stored training set plus the weighted sample.
    """
    X = np.asarray(X, dtype=np.float64)
    rel = np.asarray(rel_weights, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ModelError("new data does not match the model's feature count")
    if X.shape[0] == 0:
        raise ModelError("cannot adapt to an empty dataset")
    if isinstance(model, AffineModel):
        return adapt_affine(model, X, y, config.C * rel, config)
    if isinstance(model, GaussianNB):
        return adapt_gnb(model, X, np.asarray(y, dtype=np.int64), rel, config.C,
                         config.proximity_weight)
    if isinstance(model, DecisionTree):
        y = np.asarray(y, dtype=np.int64)
        if y.max() >= model.n_classes:
            raise ModelError("new data contains classes unknown to the model")
        return fit_tree(np.vstack([model.train_X, X]),
                        np.concatenate([model.train_y, y]),
                        np.concatenate([model.train_w, rel]),
                        n_classes=model.n_classes, max_depth=model.max_depth,
                        min_samples_leaf=model.min_samples_leaf)
    raise ModelError(f"cannot adapt {type(model).__name__}")


def adapt(model: Model, data: Dataset, config: AdaptationConfig = AdaptationConfig(),
          family=None) -> Model:
    """Adapt ``model`` to ``data``; returns a new model.

    Non-convergence is reported through ``ConvergenceWarning`` and the
    ``converged`` entry of the result's ``info``.
    """
    if family is not None and Family(family) is not model.family:
        raise ModelError(f"family mismatch: {Family(family).value} vs {model.family.value}")
    _check_task(model.family, data)
    return adapt_weighted(model, data.features, data.labels, np.ones(len(data)), config)


def model_to_dict(model: Model) -> dict:
    return {"format": FORMAT, "version": FORMAT_VERSION, "family": model.family.value,
            "n_features": model.n_features, "params": model.params()}


def model_from_dict(doc: dict) -> Model:
    if doc.get("format") != FORMAT:
        raise ModelError("not a model document")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelError(f"unsupported model format version {doc.get('version')!r}")
    family = Family(doc["family"])
    p = dict(doc["params"])
    if family is Family.DECISION_TREE:
        p["train_X"] = np.asarray(p["train_X"], dtype=np.float64).reshape(-1, doc["n_features"])
        return DecisionTree(n_features=doc["n_features"], **p)
    model = _CLASSES[family](**p)
    if model.n_features != doc["n_features"]:
        raise ModelError("n_features does not match the parameters")
    return model


def save_model(model: Model, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def load_model(path) -> Model:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
