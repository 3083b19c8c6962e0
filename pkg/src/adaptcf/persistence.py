"""Persistence constraints and constrained model adaptation.

A constraint is an extra labeled point ``(x, y)`` the adapted model should
reproduce. Constraints join the new data with relative weight ``C' / C``.
"""

import json
import os
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from .counterfactuals import (CfSolverConfig, counterfactual, default_target,
                              pertinent_positive)
from .data import Dataset, Task
from .models import AdaptationConfig, Model, ModelError, adapt_weighted
from .models.base import as_point
from .rng import Stream


class PersistenceError(ValueError):
    pass


class Kind(str, Enum):
    BALL_SAMPLE = "ball_sample"
    ROBUSTNESS_SHIFT = "robustness_shift"
    PERSISTENT_CF = "persistent_cf"
    PERSISTENT_PP = "persistent_pp"


@dataclass(frozen=True)
class PersistenceConstraint:
    x: np.ndarray
    y: object
    kind: Kind
    origin: object = None

    def __post_init__(self):
        x = np.array(self.x, dtype=np.float64).ravel()
        if x.size == 0 or not np.all(np.isfinite(x)):
            raise PersistenceError("constraint point must be finite and non-empty")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "kind", Kind(self.kind))

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "y": self.y, "kind": self.kind.value,
                "origin": self.origin}

    @classmethod
    def from_dict(cls, d: dict) -> "PersistenceConstraint":
        try:
            return cls(d["x"], d["y"], d["kind"], d.get("origin"))
        except KeyError as exc:
            raise PersistenceError(f"constraint is missing field {exc.args[0]!r}") from None


@dataclass(frozen=True)
class ConstrainedAdaptConfig:
    """Settings for constrained adaptation.

    ``C`` overrides ``base.C`` when given. ``C_prime = 0`` disables the
    constraint term. ``ball_p`` accepts 1, 2 or ``inf``.
    """

    C: Optional[float] = None
    C_prime: float = 10.0
    base: AdaptationConfig = AdaptationConfig()
    ball_lambda: float = 0.1
    ball_p: float = 2
    ball_samples: int = 20
    seed: int = 0
    regression_tolerance: float = 0.5

    def __post_init__(self):
        if self.C is not None and self.C <= 0:
            raise PersistenceError("C must be positive")
        if self.C_prime < 0:
            raise PersistenceError("C_prime must be non-negative")
        if self.ball_lambda <= 0:
            raise PersistenceError("ball_lambda must be positive")
        if self.ball_p not in (1, 2, np.inf):
            raise PersistenceError("ball_p must be 1, 2 or inf")
        if self.ball_samples < 0:
            raise PersistenceError("ball_samples must be non-negative")
        if self.seed < 0:
            raise PersistenceError("seed must be an unsigned integer")

    @property
    def data_weight(self) -> float:
        return self.base.C if self.C is None else self.C

    @property
    def adaptation(self) -> AdaptationConfig:
        return replace(self.base, C=self.data_weight)


def sample_ball(center, radius: float, p, n: int, seed: int) -> np.ndarray:
    """``n`` points uniform in the ``p``-norm ball around ``center``.

    Exact samplers: a scaled random direction for ``p=2``, normalised
    exponentials with random signs for ``p=1`` and a uniform cube for ``inf``.
    """
    center = np.asarray(center, dtype=np.float64)
    d = center.size
    rs = Stream(seed)
    if n == 0:
        return np.empty((0, d))
    if p == np.inf:
        return center + rs.uniform(-radius, radius, size=(n, d))
    if p == 2:
        g = rs.normal(size=(n, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = rs.uniform(size=n) ** (1.0 / d)
        return center + radius * r[:, None] * g
    if p == 1:
        e = rs.exponential(size=(n, d + 1))
        pts = e[:, :d] / e.sum(axis=1, keepdims=True)
        signs = np.where(rs.uniform(size=(n, d)) < 0.5, -1.0, 1.0)
        return center + radius * signs * pts
    raise PersistenceError("ball_p must be 1, 2 or inf")


def build_ball_constraints(x, y, config: ConstrainedAdaptConfig = ConstrainedAdaptConfig(),
                           origin=None):
    """``x`` itself followed by ``ball_samples`` seeded points of the ball around it."""
    x = np.asarray(x, dtype=np.float64).ravel()
    pts = sample_ball(x, config.ball_lambda, config.ball_p, config.ball_samples, config.seed)
    return [PersistenceConstraint(p, y, Kind.BALL_SAMPLE, origin) for p in np.vstack([x, pts])]


def build_robustness_constraints(x, y, shifts, origin=None):
    """One constraint ``(x + z, y)`` per shift ``z``."""
    x = np.asarray(x, dtype=np.float64).ravel()
    out = []
    for z in shifts:
        z = np.asarray(z, dtype=np.float64).ravel()
        if z.shape != x.shape:
            raise PersistenceError(f"dimension mismatch: shift {z.shape} vs point {x.shape}")
        out.append(PersistenceConstraint(x + z, y, Kind.ROBUSTNESS_SHIFT, origin))
    return out


def build_persistent_cf_constraint(x, h: Model, origin=None, target=None,
                                   solver: CfSolverConfig = CfSolverConfig()):
    """Keep the counterfactual of ``x`` under ``h`` valid after adaptation."""
    x = as_point(x, h.n_features)
    if target is None:
        target = default_target(h, x)
    res = counterfactual(h, x, target, solver)
    if not res.valid:
        raise PersistenceError(f"no valid counterfactual for sample {origin!r}")
    return PersistenceConstraint(res.x_cf, res.target, Kind.PERSISTENT_CF, origin)


def build_persistent_pp_constraint(x, h: Model, defaults, epsilon: float = 1e-9, origin=None):
    """Keep the pertinent positive of ``x`` under ``h`` predicting the same label."""
    res = pertinent_positive(h, x, defaults, epsilon)
    if not res.valid:
        raise PersistenceError(f"no valid pertinent positive for sample {origin!r}")
    return PersistenceConstraint(res.x_pp, res.label, Kind.PERSISTENT_PP, origin)


def _satisfied(model: Model, c: PersistenceConstraint, tol: float) -> tuple:
    pred = model.predict(c.x)
    if model.is_classifier:
        return pred, bool(pred == c.y)
    return pred, bool(abs(pred - c.y) <= tol)


@dataclass
class SatisfactionReport:
    entries: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def n_satisfied(self) -> int:
        return sum(e["satisfied"] for e in self.entries)

    @property
    def fraction(self) -> float:
        return self.n_satisfied / len(self.entries) if self.entries else 1.0

    def to_dict(self) -> dict:
        return {"n_constraints": len(self.entries), "n_satisfied": self.n_satisfied,
                "fraction_satisfied": self.fraction, "warnings": list(self.warnings),
                "constraints": self.entries}


def satisfaction_report(model: Model, constraints, tolerance: float = 0.5) -> SatisfactionReport:
    rep = SatisfactionReport()
    for c in constraints:
        pred, ok = _satisfied(model, c, tolerance)
        rep.entries.append({"origin": c.origin, "kind": c.kind.value, "x": c.x.tolist(),
                            "y": c.y, "predicted": pred, "satisfied": ok})
    return rep


@dataclass
class ConstrainedResult:
    model: Model
    report: SatisfactionReport


def adapt_with_constraints(h: Model, data: Dataset, constraints,
                           config: ConstrainedAdaptConfig = ConstrainedAdaptConfig()) -> ConstrainedResult:
    """Adapt ``h`` to ``data`` while penalising violated constraints.

    Constraint points are appended to the new data with relative weight
    ``C_prime / C``. An empty constraint list (or ``C_prime = 0``) reduces to
    plain adaptation with ``config.adaptation``.
    """
    if len(data) == 0:
        raise PersistenceError("cannot adapt to an empty dataset")
    if (data.task is Task.REGRESSION) == h.is_classifier:
        raise ModelError(f"{h.family.value} cannot be adapted to {data.task.value} data")
    constraints = list(constraints)
    for c in constraints:
        if c.x.size != h.n_features:
            raise PersistenceError(f"constraint from {c.origin!r} has {c.x.size} features, "
                                   f"model expects {h.n_features}")
    cfg = config.adaptation
    active = constraints if config.C_prime > 0 else []
    X, y = data.features, data.labels
    rel = np.ones(len(data))
    if active:
        X = np.vstack([X, [c.x for c in active]])
        y = np.concatenate([y, np.asarray([c.y for c in active], dtype=y.dtype)])
        rel = np.concatenate([rel, np.full(len(active), config.C_prime / config.data_weight)])
    model = adapt_weighted(h, X, y, rel, cfg)
    report = satisfaction_report(model, constraints, config.regression_tolerance)
    if constraints and report.n_satisfied < len(constraints):
        report.warnings.append(f"{len(constraints) - report.n_satisfied} of "
                               f"{len(constraints)} constraints violated")
    return ConstrainedResult(model, report)


def shift_violations(model: Model, X, feature: int, shifts, source, forbidden) -> np.ndarray:
    """Flag rows predicted ``source`` that some positive shift of ``feature`` turns into ``forbidden``."""
    X = np.asarray(X, dtype=np.float64)
    base = model.predict_batch(X)
    hit = np.zeros(len(X), dtype=bool)
    for s in shifts:
        Z = X.copy()
        Z[:, feature] += s
        hit |= model.predict_batch(Z) == forbidden
    return (base == source) & hit


def constraints_to_json(constraints) -> str:
    return json.dumps([c.to_dict() for c in constraints], indent=1) + "\n"


def save_constraints(constraints, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(constraints_to_json(constraints), encoding="utf-8")
    os.replace(tmp, path)


def load_constraints(path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, list):
        raise PersistenceError("constraints file must hold a JSON list")
    return [PersistenceConstraint.from_dict(d) for d in doc]
