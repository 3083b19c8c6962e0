"""Contrastive explanations: closest counterfactuals and pertinent positives.

Solvers are deterministic: for a given model, input and configuration each
returns one canonical answer.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .models import (DecisionTree, LinearClassifier, LinearRegression, LogisticRegression,
                     Model, NonDifferentiableError)
from .models.base import as_point
from .optim import gradient_descent

DEFAULT_MARGIN = 1e-4


class CounterfactualError(ValueError):
    pass


class Solver(str, Enum):
    CLOSED_FORM = "closed_form"
    GRADIENT_PENALTY = "gradient_penalty"
    LEAF_ENUM = "leaf_enum"


@dataclass(frozen=True)
class Interval:
    """Regression target: predictions within ``center +- deviation``."""

    center: float
    deviation: float = 0.0

    def __post_init__(self):
        if self.deviation < 0:
            raise CounterfactualError("deviation must be non-negative")

    def contains(self, value) -> bool:
        return abs(value - self.center) <= self.deviation

    def to_dict(self):
        return {"center": self.center, "deviation": self.deviation}


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, Interval):
        return v.to_dict()
    if isinstance(v, Enum):
        return v.value
    if isinstance(v, (set, frozenset)):
        return sorted(v)
    return v


@dataclass(frozen=True, eq=False)
class CounterfactualResult:
    x_orig: np.ndarray
    x_cf: np.ndarray
    target: object
    valid: bool
    solver: Solver
    iterations: int = 0
    delta: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "delta", self.x_cf - self.x_orig)

    def distance(self, p=2) -> float:
        return float(np.linalg.norm(self.delta, ord=p))

    def to_dict(self) -> dict:
        return {k: _jsonable(getattr(self, k)) for k in
                ("x_orig", "x_cf", "delta", "target", "valid", "solver", "iterations")}


@dataclass(frozen=True, eq=False)
class PertinentPositiveResult:
    x_orig: np.ndarray
    x_pp: np.ndarray
    on_features: frozenset
    defaults: np.ndarray
    epsilon: float
    label: object
    valid: bool

    def to_dict(self) -> dict:
        return {k: _jsonable(getattr(self, k)) for k in
                ("x_orig", "x_pp", "on_features", "defaults", "epsilon", "label", "valid")}


@dataclass(frozen=True)
class CfSolverConfig:
    """Exterior-penalty continuation for :func:`cf_gradient_penalty`.

    Each stage minimises ``distance(z, x) + C * hinge(z)`` for the next ``C``
    in ``C_schedule``, warm-started from the previous stage. ``p`` selects
    the squared Euclidean (2) or L1 (1) distance.
    """

    C_schedule: tuple = (1.0, 10.0, 100.0, 1000.0)
    max_iters: int = 500
    step_size: float = 1.0
    margin: float = DEFAULT_MARGIN
    p: int = 2
    tolerance: float = 1e-14

    def __post_init__(self):
        cs = tuple(float(c) for c in self.C_schedule)
        if not cs or cs[0] <= 0 or any(b <= a for a, b in zip(cs, cs[1:])):
            raise CounterfactualError("C_schedule must be positive and strictly increasing")
        if self.margin <= 0:
            raise CounterfactualError("margin must be positive")
        if self.p not in (1, 2):
            raise CounterfactualError("distance order p must be 1 or 2")
        if self.max_iters < 1 or self.step_size <= 0:
            raise CounterfactualError("max_iters and step_size must be positive")
        object.__setattr__(self, "C_schedule", cs)


def meets_target(model: Model, x, target) -> bool:
    if isinstance(target, Interval):
        return target.contains(model.decision_function(x))
    return model.predict(x) == target


def default_target(model: Model, x):
    """The opposite class of a binary classifier's prediction."""
    if not model.is_classifier:
        raise CounterfactualError("regression counterfactuals need an Interval target")
    if model.n_classes != 2:
        raise CounterfactualError("multiclass counterfactuals need an explicit target")
    return 1 - model.predict(x)


def closest_cf_linear(model, x, margin=DEFAULT_MARGIN) -> CounterfactualResult:
    """Orthogonal projection onto the hyperplane, overshot by ``margin * |f(x)|``."""
    if not isinstance(model, (LinearClassifier, LogisticRegression)):
        raise CounterfactualError("closed form needs an affine binary classifier")
    x = as_point(x, model.n_features)
    f = float(x @ model.coef + model.intercept)
    if f == 0.0:
        raise CounterfactualError("ill-defined counterfactual target: x lies on the boundary")
    w = model.coef
    x_cf = x - (f / (w @ w)) * (1.0 + margin) * w
    target = 0 if f > 0 else 1
    return CounterfactualResult(x, x_cf, target, model.predict(x_cf) == target, Solver.CLOSED_FORM)


def cf_gradient_penalty(model: Model, x, target=None,
                        config: CfSolverConfig = CfSolverConfig()) -> CounterfactualResult:
    """Closest counterfactual of a differentiable classifier by penalty continuation.

    Minimises ``|z - x|`` (squared for ``p=2``) plus
    ``C * max(0, 2*margin - f_target(z))``, where ``f_target`` is the
    target-vs-rest decision function. The hinge is not squared, so once ``C``
    is large enough the minimiser sits on the shifted boundary itself rather
    than short of it. A result is valid when the prediction equals ``target``
    and ``f_target(z) >= margin``.
    """
    if not model.differentiable:
        raise NonDifferentiableError(model.family)
    if not model.is_classifier:
        raise CounterfactualError("use cf_regression for regression models")
    x = as_point(x, model.n_features)
    if target is None:
        target = default_target(model, x)
    if model.predict(x) == target:
        raise CounterfactualError(f"precondition violated: x is already predicted as {target!r}")
    level = 2.0 * config.margin

    if config.p == 2:
        def dist(z):
            d = z - x
            return d @ d

        def dist_grad(z):
            return 2.0 * (z - x)
    else:
        def dist(z):
            return np.abs(z - x).sum()

        def dist_grad(z):
            return np.sign(z - x)

    def valid(z):
        return model.predict(z) == target and model.decision_function(z, target) >= config.margin

    z = x.copy()
    iterations = 0
    for C in config.C_schedule:
        def fun(z, C=C):
            return dist(z) + C * max(0.0, level - model.decision_function(z, target))

        def grad(z, C=C):
            g = dist_grad(z)
            if level - model.decision_function(z, target) > 0.0:
                g = g - C * model.gradient(z, target)
            return g

        res = gradient_descent(fun, grad, z, max_iters=config.max_iters,
                               step_size=config.step_size, tolerance=config.tolerance)
        z = res.x
        iterations += res.iterations
        if valid(z):
            if config.p == 2:
                z, extra = _slide_on_boundary(model, x, z, target, level, valid,
                                              config.max_iters)
                iterations += extra
            return CounterfactualResult(x, z, target, True, Solver.GRADIENT_PENALTY, iterations)
    return CounterfactualResult(x, z, target, False, Solver.GRADIENT_PENALTY, iterations)


def _to_level(model, z, target, level, newton_steps=8):
    for _ in range(newton_steps):
        gap = level - model.decision_function(z, target)
        if abs(gap) <= 1e-15 * max(1.0, level):
            break
        g = model.gradient(z, target)
        gg = g @ g
        if gg == 0.0:
            break
        z = z + (gap / gg) * g
    return z


def _slide_on_boundary(model, x, z, target, level, valid, max_iters):
    """Refine a valid penalty solution on the level set ``f_target = level``.

    The hinge kink makes plain descent zig-zag along curved boundaries; here
    each step removes the normal component of ``z - x``, moves along the
    tangent and pulls back onto the level set with Newton steps. Only moves
    that shorten the distance and stay valid are accepted.
    """
    lifted = _to_level(model, z, target, level)
    if valid(lifted):
        z = lifted
    d_best = float((z - x) @ (z - x))
    t = 1.0
    for it in range(1, max_iters + 1):
        g = model.gradient(z, target)
        gg = g @ g
        if gg == 0.0:
            return z, it - 1
        d = z - x
        tangent = d - (d @ g / gg) * g
        if np.sqrt(tangent @ tangent) <= 1e-12 * max(1.0, np.sqrt(d_best)):
            return z, it - 1
        while t > 1e-12:
            cand = _to_level(model, z - t * tangent, target, level)
            dc = float((cand - x) @ (cand - x))
            if dc < d_best and valid(cand):
                break
            t *= 0.5
        else:
            return z, it - 1
        improvement = d_best - dc
        z, d_best = cand, dc
        t = min(1.0, 2.0 * t)
        if improvement <= 1e-15 * max(1.0, d_best):
            return z, it
    return z, max_iters


def _box_point(x, lo, hi, margin):
    z = x.copy()
    below = x <= lo
    above = x > hi
    z[below] = lo[below] + margin
    z[above] = hi[above] - margin
    # boxes thinner than the margin: take the middle
    thin = (below | above) & (hi - lo <= 2 * margin)
    z[thin] = 0.5 * (lo[thin] + hi[thin])
    return z


def cf_tree(model: DecisionTree, x, target=None, p=2, margin=DEFAULT_MARGIN) -> CounterfactualResult:
    """Exact closest counterfactual by projecting onto every target-labelled leaf box."""
    if not isinstance(model, DecisionTree):
        raise CounterfactualError("cf_tree needs a decision tree")
    if p not in (1, 2):
        raise CounterfactualError("distance order p must be 1 or 2")
    x = as_point(x, model.n_features)
    if target is None:
        target = default_target(model, x)
    best, best_d, n_boxes = None, np.inf, 0
    for _, label, lo, hi in model.leaf_boxes():
        if label != target:
            continue
        n_boxes += 1
        z = _box_point(x, lo, hi, margin)
        d = np.linalg.norm(z - x, ord=p)
        if d < best_d:
            best, best_d = z, d
    if best is None:
        raise CounterfactualError(f"no leaf predicts class {target!r}")
    return CounterfactualResult(x, best, target, model.predict(best) == target,
                                Solver.LEAF_ENUM, n_boxes)


def cf_regression(model: LinearRegression, x, target: float, deviation: float) -> CounterfactualResult:
    """Closest point whose prediction lies within ``target +- deviation``."""
    if not isinstance(model, LinearRegression):
        raise CounterfactualError("cf_regression needs a linear regression model")
    x = as_point(x, model.n_features)
    goal = Interval(float(target), float(deviation))
    beta = model.coef
    bb = float(beta @ beta)
    if bb == 0.0:
        raise CounterfactualError("zero coefficient vector: prediction cannot be moved")
    f = model.decision_function(x)
    if goal.contains(f):
        return CounterfactualResult(x, x.copy(), goal, True, Solver.CLOSED_FORM)
    face = goal.center + goal.deviation if f > goal.center else goal.center - goal.deviation
    x_cf = x + ((face - f) / bb) * beta
    # rounding can leave the point a few ulps outside; nudge inward
    inward = np.sign(goal.center - face)
    step = np.finfo(float).eps * max(1.0, abs(face))
    for _ in range(64):
        if goal.contains(model.decision_function(x_cf)):
            break
        x_cf = x_cf + inward * (step / bb) * beta
        step *= 2
    return CounterfactualResult(x, x_cf, goal, goal.contains(model.decision_function(x_cf)),
                                Solver.CLOSED_FORM)


def counterfactual(model: Model, x, target=None, config: CfSolverConfig = CfSolverConfig()):
    """Dispatch to the solver suited to ``model``."""
    if isinstance(target, Interval) or isinstance(model, LinearRegression):
        if not isinstance(target, Interval):
            raise CounterfactualError("regression counterfactuals need an Interval target")
        return cf_regression(model, x, target.center, target.deviation)
    if isinstance(model, DecisionTree):
        return cf_tree(model, x, target, p=config.p, margin=config.margin)
    if isinstance(model, (LinearClassifier, LogisticRegression)) and config.p == 2:
        res = closest_cf_linear(model, x, config.margin)
        if target is not None and res.target != target:
            raise CounterfactualError(f"precondition violated: x is already predicted as {target!r}")
        return res
    return cf_gradient_penalty(model, x, target, config)


def pertinent_positive(model: Model, x, defaults, epsilon: float = 1e-9) -> PertinentPositiveResult:
    """Greedy backward elimination of features toward ``defaults``.

    Features within ``epsilon`` of their default start switched off. Each
    round switches off the feature whose removal keeps the original
    prediction, preferring the one leaving the largest decision margin
    (lowest index for trees and ties). Stops when no single removal keeps
    the prediction. For differentiable binary models "keeps" means a
    strictly positive margin for the original label.
    """
    if epsilon < 0:
        raise CounterfactualError("epsilon must be non-negative")
    x = as_point(x, model.n_features)
    defaults = as_point(defaults, model.n_features)
    label = model.predict(x)
    regression = not model.is_classifier

    # on differentiable binary models a point exactly on the boundary only
    # keeps the label by the tie rule, so a strict margin is required
    strict = (not regression and model.differentiable and model.n_classes == 2
              and model.decision_function(x, label) > 0.0)

    def keeps(z):
        if regression:
            return abs(model.predict(z) - label) <= epsilon
        if strict:
            return model.decision_function(z, label) > 0.0
        return model.predict(z) == label

    def score(z):
        if regression or not model.differentiable:
            return 0.0
        return model.decision_function(z, label)

    z = x.copy()
    near = np.abs(x - defaults) <= epsilon
    z[near] = defaults[near]
    if not keeps(z):
        z = x.copy()
    on = [i for i in range(len(x)) if z[i] != defaults[i]]
    while on:
        best, best_score = None, -np.inf
        for i in on:
            cand = z.copy()
            cand[i] = defaults[i]
            if keeps(cand):
                s = score(cand)
                if s > best_score:
                    best, best_score = i, s
        if best is None:
            break
        z[best] = defaults[best]
        on.remove(best)
    on_features = frozenset(int(i) for i in np.flatnonzero(np.abs(z - defaults) > epsilon))
    return PertinentPositiveResult(x, z, on_features, defaults, float(epsilon), label, keeps(z))
