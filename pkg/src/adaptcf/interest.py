"""Score data points by how much an adaptation changed the local explanation."""

import csv
import io
import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .counterfactuals import CfSolverConfig, CounterfactualError, counterfactual, default_target
from .data import Dataset
from .models import Model, NonDifferentiableError


class Method(str, Enum):
    EXACT_EUCLID = "exact_euclid"
    EXACT_COSINE = "exact_cosine"
    GRADIENT_COSINE = "gradient_cosine"


class InterestError(ValueError):
    pass


@dataclass(frozen=True)
class InterestConfig:
    """``epsilon`` relaxes the cosine denominator; ``eta`` is the surrogate step."""

    method: Method = Method.GRADIENT_COSINE
    epsilon: float = 1e-8
    eta: float = 1.0
    solver: CfSolverConfig = CfSolverConfig()

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.epsilon <= 0 or self.eta <= 0:
            raise InterestError("epsilon and eta must be positive")


def relaxed_shifted_cosine(a, b, epsilon: float) -> float:
    """``2 - <a, b> / (|a| |b| + epsilon)``; equals 2 when either vector vanishes."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(2.0 - (a @ b) / (np.linalg.norm(a) * np.linalg.norm(b) + epsilon))


def _cf_direction(model: Model, x, solver):
    """``CF(x) - x``; zero for points on the decision boundary."""
    if model.is_classifier and model.n_classes == 2 and model.differentiable:
        if model.decision_function(x) == 0.0:
            return np.zeros_like(x)
    try:
        res = counterfactual(model, x, default_target(model, x), solver)
    except CounterfactualError as exc:
        if "boundary" in str(exc):
            return np.zeros_like(x)
        raise
    if not res.valid:
        raise InterestError(f"no valid counterfactual at {x.tolist()}")
    return res.delta


def interest_exact(x, h: Model, h_new: Model, config: InterestConfig = InterestConfig()) -> float:
    """Compare the actual counterfactuals of both models at ``x``."""
    x = np.asarray(x, dtype=np.float64)
    d_old = _cf_direction(h, x, config.solver)
    d_new = _cf_direction(h_new, x, config.solver)
    if config.method is Method.EXACT_EUCLID:
        return float(np.linalg.norm(d_old - d_new))
    return relaxed_shifted_cosine(d_old, d_new, config.epsilon)


def surrogate_direction(model: Model, x) -> np.ndarray:
    """``-h(x) * grad f(x)`` with ``h(x)`` in {-1, +1}."""
    if not model.differentiable:
        raise NonDifferentiableError(model.family)
    sign = 1.0 if model.decision_function(x) >= 0.0 else -1.0
    return -sign * model.gradient(x)


def surrogate_counterfactual(model: Model, x, eta: float) -> np.ndarray:
    """One gradient step toward the boundary: ``x + eta * surrogate_direction``."""
    return x + eta * surrogate_direction(model, x)


def interest_gradient_surrogate(x, h: Model, h_new: Model,
                                config: InterestConfig = InterestConfig()) -> float:
    """Shifted relaxed cosine between the surrogate counterfactual directions.

    The cosine only sees directions, so ``eta`` drops out and is not used.
    """
    x = np.asarray(x, dtype=np.float64)
    return relaxed_shifted_cosine(surrogate_direction(h, x), surrogate_direction(h_new, x),
                                  config.epsilon)


def interest(x, h: Model, h_new: Model, config: InterestConfig = InterestConfig()) -> float:
    if config.method is Method.GRADIENT_COSINE:
        return interest_gradient_surrogate(x, h, h_new, config)
    return interest_exact(x, h, h_new, config)


def rank_samples(data: Dataset, h: Model, h_new: Model, k: int,
                 config: InterestConfig = InterestConfig()):
    """Top ``k`` rows as ``(index, score)``, highest score first, ties by index."""
    if not 1 <= k <= len(data):
        raise InterestError(f"k must be between 1 and {len(data)}, got {k}")
    scores = [interest(x, h, h_new, config) for x in data.features]
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return [(i, scores[i]) for i in order[:k]]


def ranking_to_json(ranking) -> str:
    return json.dumps([{"index": i, "score": s} for i, s in ranking], indent=1) + "\n"


def ranking_to_csv(ranking) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "score"])
    for i, s in ranking:
        w.writerow([i, repr(float(s))])
    return buf.getvalue()
