import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, softmax

from .base import Family, Model, ModelError, as_matrix, as_point, frozen_array

VAR_SMOOTHING = 1e-9
MIN_VARIANCE = 1e-12


@dataclass(frozen=True, eq=False)
class GaussianNB(Model):
    """Gaussian naive Bayes with per-class, per-feature variances.

    ``variance_floor`` is the smoothing term already included in
    ``variances``; adaptation removes and re-applies it when blending
    second moments.
    """

    priors: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    variance_floor: float = 0.0
    info: dict = field(default_factory=dict, compare=False, repr=False)

    family = Family.GAUSSIAN_NB

    def __post_init__(self):
        priors = np.asarray(self.priors, dtype=np.float64)
        means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        variances = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))
        if priors.ndim != 1 or means.shape != variances.shape or means.shape[0] != priors.size:
            raise ModelError("priors, means and variances have inconsistent shapes")
        if priors.size < 2:
            raise ModelError("gaussian_nb needs at least two classes")
        if np.any(priors <= 0) or not np.isclose(priors.sum(), 1.0, rtol=0, atol=1e-9):
            raise ModelError("class priors must be positive and sum to one")
        if not np.all(variances > 0):
            raise ModelError("gaussian_nb variances must be strictly positive")
        object.__setattr__(self, "priors", frozen_array(priors))
        object.__setattr__(self, "means", frozen_array(means))
        object.__setattr__(self, "variances", frozen_array(variances))
        object.__setattr__(self, "variance_floor", float(self.variance_floor))

    @property
    def n_features(self) -> int:
        return self.means.shape[1]

    @property
    def n_classes(self) -> int:
        return self.priors.size

    def joint_log_likelihood(self, X) -> np.ndarray:
        X = as_matrix(X, self.n_features)
        out = np.empty((X.shape[0], self.n_classes))
        for k in range(self.n_classes):
            var = self.variances[k]
            out[:, k] = (np.log(self.priors[k])
                         - 0.5 * np.sum(np.log(2.0 * np.pi * var))
                         - 0.5 * np.sum((X - self.means[k]) ** 2 / var, axis=1))
        return out

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.joint_log_likelihood(X), axis=1)

    def _target(self, target):
        if target is None:
            if self.n_classes != 2:
                raise ModelError("multiclass decision function needs a target class")
            return 1
        if not 0 <= target < self.n_classes:
            raise ModelError(f"no class {target!r}")
        return int(target)

    def decision_batch(self, X, target=None) -> np.ndarray:
        """Log-odds of ``target`` against the rest (class 1 vs 0 when binary)."""
        t = self._target(target)
        jll = self.joint_log_likelihood(X)
        rest = np.delete(jll, t, axis=1)
        return jll[:, t] - logsumexp(rest, axis=1)

    def decision_function(self, x, target=None) -> float:
        x = as_point(x, self.n_features)
        return float(self.decision_batch(x[None, :], target)[0])

    def gradient(self, x, target=None) -> np.ndarray:
        x = as_point(x, self.n_features)
        t = self._target(target)
        # d/dx log N(x; mu_k, var_k)
        g = -(x - self.means) / self.variances
        jll = self.joint_log_likelihood(x[None, :])[0]
        rest = [k for k in range(self.n_classes) if k != t]
        weights = softmax(jll[rest])
        return g[t] - weights @ g[rest]

    def predict_batch(self, X) -> np.ndarray:
        if self.n_classes == 2:
            return (self.decision_batch(X) >= 0.0).astype(np.int64)
        return np.argmax(self.joint_log_likelihood(X), axis=1).astype(np.int64)

    def params(self) -> dict:
        return {"priors": self.priors.tolist(), "means": self.means.tolist(),
                "variances": self.variances.tolist(), "variance_floor": self.variance_floor}


def _weighted_moments(X, y, w, n_classes):
    """Per-class total weight, mean and raw second moment (absent classes give zeros)."""
    d = X.shape[1]
    totals = np.zeros(n_classes)
    m1 = np.zeros((n_classes, d))
    m2 = np.zeros((n_classes, d))
    for k in range(n_classes):
        sel = (y == k) & (w > 0)
        wk = w[sel]
        totals[k] = wk.sum()
        if totals[k] > 0:
            m1[k] = wk @ X[sel] / totals[k]
            m2[k] = wk @ (X[sel] ** 2) / totals[k]
    return totals, m1, m2


def fit_gnb(X, y, sample_weights=None) -> GaussianNB:
    n_classes = int(y.max()) + 1
    w = np.ones(len(y)) if sample_weights is None else np.asarray(sample_weights, dtype=np.float64)
    totals, m1, m2 = _weighted_moments(X, y, w, n_classes)
    if np.any(totals <= 0):
        missing = np.flatnonzero(totals <= 0).tolist()
        raise ModelError(f"classes {missing} have no (weighted) training samples")
    floor = max(VAR_SMOOTHING * float(np.max(np.var(X, axis=0))), MIN_VARIANCE)
    var = np.maximum(m2 - m1 ** 2, 0.0) + floor
    return GaussianNB(totals / totals.sum(), m1, var, floor)


def adapt_gnb(model: GaussianNB, X, y, sample_weights, C: float, proximity: float) -> GaussianNB:
    """Blend normalised sufficient statistics, new data weighted ``C / (C + proximity)``.

    Classes missing from the new data keep their old means and variances.
    """
    mix = C / (C + proximity) if C + proximity > 0 else 0.0
    if mix == 0.0 or len(y) == 0:
        return GaussianNB(model.priors, model.means, model.variances, model.variance_floor,
                          info={"blend": mix})
    if y.max() >= model.n_classes:
        raise ModelError("new data contains classes unknown to the model")
    totals, m1_new, m2_new = _weighted_moments(X, y, np.asarray(sample_weights, dtype=np.float64),
                                               model.n_classes)
    if totals.sum() <= 0:
        raise ModelError("zero total sample weight")
    present = totals > 0
    m1_old = np.array(model.means)
    m2_old = (model.variances - model.variance_floor) + m1_old ** 2
    priors = (1 - mix) * model.priors + mix * totals / totals.sum()
    m1 = np.where(present[:, None], (1 - mix) * m1_old + mix * m1_new, m1_old)
    m2 = np.where(present[:, None], (1 - mix) * m2_old + mix * m2_new, m2_old)
    floor = max(model.variance_floor, VAR_SMOOTHING * float(np.max(np.var(X, axis=0))))
    var = np.maximum(m2 - m1 ** 2, 0.0) + floor
    if np.any(priors <= 0):
        warnings.warn("a class prior collapsed to zero; clamping", RuntimeWarning, stacklevel=2)
        priors = np.maximum(priors, 1e-12)
    return GaussianNB(priors / priors.sum(), m1, var, floor, info={"blend": mix})
