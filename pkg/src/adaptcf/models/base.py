from dataclasses import dataclass
from enum import Enum

import numpy as np


class Family(str, Enum):
    LINEAR_CLASSIFIER = "linear_classifier"
    LOGISTIC_REGRESSION = "logistic_regression"
    LINEAR_REGRESSION = "linear_regression"
    GAUSSIAN_NB = "gaussian_nb"
    DECISION_TREE = "decision_tree"


class ModelError(ValueError):
    pass


class NonDifferentiableError(ModelError):
    def __init__(self, family):
        super().__init__(f"non-differentiable family: {Family(family).value}")


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class AdaptationConfig:
    """Weights and optimiser settings for adapting a model to new data.

    ``C`` weighs the data-fit term, ``proximity_weight`` the squared parameter
    distance to the original model.
    """

    C: float = 1.0
    proximity_weight: float = 0.1
    max_iters: int = 5000
    step_size: float = 1.0
    tolerance: float = 1e-8

    def __post_init__(self):
        if self.C < 0 or self.proximity_weight < 0:
            raise ModelError("C and proximity_weight must be non-negative")
        if self.max_iters < 1 or self.step_size <= 0 or self.tolerance <= 0:
            raise ModelError("max_iters, step_size and tolerance must be positive")


def as_point(x, n_features: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != n_features:
        raise ModelError(f"expected a vector of length {n_features}, got shape {x.shape}")
    return x


def as_matrix(X, n_features: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != n_features:
        raise ModelError(f"expected {n_features} feature columns, got shape {X.shape}")
    return X


def frozen_array(a, dtype=np.float64) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


class Model:
    """Common surface of every model family.

    Binary classifiers predict class 1 when the decision function is
    non-negative and class 0 otherwise.
    """

    family: Family
    n_features: int

    @property
    def n_classes(self):
        return None

    @property
    def is_classifier(self) -> bool:
        return self.n_classes is not None

    @property
    def differentiable(self) -> bool:
        return True

    def predict(self, x):
        x = as_point(x, self.n_features)
        return self.predict_batch(x[None, :])[0].item()

    def predict_batch(self, X) -> np.ndarray:
        raise NotImplementedError

    def decision_function(self, x, target=None) -> float:
        raise NonDifferentiableError(self.family)

    def decision_batch(self, X, target=None) -> np.ndarray:
        raise NonDifferentiableError(self.family)

    def gradient(self, x, target=None) -> np.ndarray:
        raise NonDifferentiableError(self.family)

    def params(self) -> dict:
        raise NotImplementedError

    def same_parameters(self, other) -> bool:
        if type(self) is not type(other):
            return False
        a, b = self.params(), other.params()
        return a.keys() == b.keys() and all(
            np.array_equal(np.asarray(a[k]), np.asarray(b[k])) for k in a)
