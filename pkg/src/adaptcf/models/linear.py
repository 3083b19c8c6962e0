"""Affine model families: unit-norm linear classifier, logistic and linear regression."""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ..optim import gradient_descent
from .base import (AdaptationConfig, ConvergenceWarning, Family, Model, ModelError,
                   as_matrix, as_point, frozen_array)

# tiny pull toward zero so separable data still has a finite optimum
FIT_RIDGE = 1e-6


@dataclass(frozen=True, eq=False)
class AffineModel(Model):
    coef: np.ndarray
    intercept: float = 0.0
    info: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        coef = np.asarray(self.coef, dtype=np.float64).ravel()
        if coef.size == 0 or not np.all(np.isfinite(coef)) or not np.isfinite(self.intercept):
            raise ModelError("coefficients must be finite and non-empty")
        object.__setattr__(self, "coef", frozen_array(coef))
        object.__setattr__(self, "intercept", float(self.intercept))

    @property
    def n_features(self) -> int:
        return self.coef.shape[0]

    @property
    def theta(self) -> np.ndarray:
        return np.append(self.coef, self.intercept)

    @classmethod
    def from_theta(cls, theta, **info):
        return cls(theta[:-1], theta[-1], info=info)

    def raw_batch(self, X) -> np.ndarray:
        X = as_matrix(X, self.n_features)
        return X @ self.coef + self.intercept

    def params(self) -> dict:
        return {"coef": self.coef.tolist(), "intercept": self.intercept}


class _BinaryAffine(AffineModel):
    @property
    def n_classes(self):
        return 2

    @staticmethod
    def _sign(target):
        if target is None or target == 1:
            return 1.0
        if target == 0:
            return -1.0
        raise ModelError(f"binary model has no class {target!r}")

    def predict_batch(self, X) -> np.ndarray:
        return (self.raw_batch(X) >= 0.0).astype(np.int64)

    def decision_batch(self, X, target=None) -> np.ndarray:
        return self._sign(target) * self.raw_batch(X)

    def decision_function(self, x, target=None) -> float:
        x = as_point(x, self.n_features)
        return self._sign(target) * float(x @ self.coef + self.intercept)

    def gradient(self, x, target=None) -> np.ndarray:
        as_point(x, self.n_features)
        return self._sign(target) * np.array(self.coef)


@dataclass(frozen=True, eq=False)
class LinearClassifier(_BinaryAffine):
    """``sign(w.x + b)`` with ``w`` rescaled to unit Euclidean norm."""

    family = Family.LINEAR_CLASSIFIER

    def __post_init__(self):
        super().__post_init__()
        norm = np.linalg.norm(self.coef)
        if norm == 0.0:
            raise ModelError("linear classifier needs a non-zero weight vector")
        # already unit up to rounding: leave bits alone so serialisation round-trips
        if abs(norm - 1.0) <= 4 * np.finfo(float).eps:
            return
        object.__setattr__(self, "coef", frozen_array(self.coef / norm))
        object.__setattr__(self, "intercept", self.intercept / norm)


@dataclass(frozen=True, eq=False)
class LogisticRegression(_BinaryAffine):
    """Decision function is the log-odds of class 1."""

    family = Family.LOGISTIC_REGRESSION

    def predict_proba(self, x) -> float:
        return float(expit(self.decision_function(x)))


@dataclass(frozen=True, eq=False)
class LinearRegression(AffineModel):
    family = Family.LINEAR_REGRESSION

    def predict_batch(self, X) -> np.ndarray:
        return self.raw_batch(X)

    def decision_batch(self, X, target=None) -> np.ndarray:
        return self.raw_batch(X)

    def decision_function(self, x, target=None) -> float:
        x = as_point(x, self.n_features)
        return float(x @ self.coef + self.intercept)

    def gradient(self, x, target=None) -> np.ndarray:
        as_point(x, self.n_features)
        return np.array(self.coef)


def _augment(X):
    return np.column_stack([X, np.ones(X.shape[0])])


def penalised_objective(cls, X, y, weights, theta0, proximity):
    """Return ``(f, grad)`` of ``proximity*|theta-theta0|^2 + sum_i weights_i*loss_i``.

    Logistic loss for the binary families, squared error for regression.
    """
    A = _augment(np.asarray(X, dtype=np.float64))
    w = np.asarray(weights, dtype=np.float64)
    theta0 = np.asarray(theta0, dtype=np.float64)
    if issubclass(cls, LinearRegression):
        t = np.asarray(y, dtype=np.float64)

        def f(theta):
            r = A @ theta - t
            d = theta - theta0
            return proximity * (d @ d) + w @ (r * r)

        def g(theta):
            r = A @ theta - t
            return 2.0 * proximity * (theta - theta0) + A.T @ (2.0 * w * r)
    else:
        s = 2.0 * np.asarray(y, dtype=np.float64) - 1.0

        def f(theta):
            d = theta - theta0
            return proximity * (d @ d) + w @ np.logaddexp(0.0, -s * (A @ theta))

        def g(theta):
            z = A @ theta
            return 2.0 * proximity * (theta - theta0) + A.T @ (-w * s * expit(-s * z))
    return f, g


def _check_weights(weights, n):
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise ModelError(f"expected {n} sample weights, got shape {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ModelError("sample weights must be non-negative and finite")
    if n and w.sum() == 0:
        raise ModelError("zero total sample weight")
    return w


def fit_affine(cls, X, y, sample_weights=None, config=AdaptationConfig()):
    w = _check_weights(sample_weights, X.shape[0])
    if issubclass(cls, LinearRegression):
        A = _augment(X) * np.sqrt(w)[:, None]
        theta, *_ = np.linalg.lstsq(A, y * np.sqrt(w), rcond=None)
        return cls.from_theta(theta)
    theta0 = np.zeros(X.shape[1] + 1)
    f, g = penalised_objective(cls, X, y, w, theta0, FIT_RIDGE)
    res = gradient_descent(f, g, theta0, max_iters=config.max_iters,
                           step_size=config.step_size, tolerance=config.tolerance)
    if not np.any(res.x[:-1]):
        raise ModelError("training produced a zero weight vector")
    return cls.from_theta(res.x, objective=res.value, iterations=res.iterations,
                          converged=res.converged)


def adapt_affine(model: AffineModel, X, y, weights, config: AdaptationConfig):
    """Gradient descent on the proximity-regularised weighted loss, from ``model``."""
    theta0 = model.theta
    f, g = penalised_objective(type(model), X, y, weights, theta0, config.proximity_weight)
    res = gradient_descent(f, g, theta0, max_iters=config.max_iters,
                           step_size=config.step_size, tolerance=config.tolerance,
                           keep_trace=True)
    if not res.converged:
        warnings.warn(f"adaptation stopped after {res.iterations} iterations "
                      "without meeting the tolerance", ConvergenceWarning, stacklevel=3)
    info = dict(objective=res.value, initial_objective=res.trace[0],
                iterations=res.iterations, converged=res.converged, trace=res.trace)
    if isinstance(model, LinearClassifier) and not np.any(res.x[:-1]):
        raise ModelError("adaptation produced a zero weight vector")
    return type(model).from_theta(res.x, **info)
