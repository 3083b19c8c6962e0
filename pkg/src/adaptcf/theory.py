"""Closed-form facts about counterfactuals of homogeneous linear classifiers.

Models are ``sign(w.x)`` with unit ``w``. A model with bias ``b`` fits the
same mould after appending a constant 1 to ``x`` and ``b`` to ``w``.
"""

from dataclasses import asdict, dataclass
import math

import numpy as np

from .rng import Stream

UNIT_TOL = 1e-12
BOUND_TOL = 1e-12


class TheoryError(ValueError):
    pass


def closest_counterfactual(x, w) -> np.ndarray:
    """Orthogonal projection of ``x`` onto ``w.z = 0`` (unit ``w``, no margin)."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    return x - (w @ x) * w


def _vec(v):
    return np.asarray(v, dtype=np.float64).ravel()


_SPLIT = 134217729.0  # 2**27 + 1


def _split(a):
    c = _SPLIT * a
    hi = c - (c - a)
    return hi, a - hi


def _two_product(a, b):
    """Element-wise ``a * b == p + e`` exactly."""
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def _fsum(*rows):
    return math.fsum(np.concatenate(rows).tolist())


def cosine_from_counterfactuals(x, x_cf, x_cf_new) -> float:
    """Cosine between ``x_cf - x`` and ``x_cf_new - x`` in expanded inner-product form.

    For exact closest counterfactuals of two unit linear models that agree
    on ``x`` this equals the cosine between their weight vectors.
    """
    x, a, b = _vec(x), _vec(x_cf), _vec(x_cf_new)
    if not (x.shape == a.shape == b.shape):
        raise TheoryError("dimension mismatch")
    # the terms nearly cancel when x is close to a boundary: sum exact
    # product pieces and round once
    p, e = _two_product(np.stack([a, x, a, b, a, b]), np.stack([b, x, x, x, a, b]))
    ab, xx, ax, bx, aa, bb = np.concatenate([p, e], axis=1)
    num = _fsum(ab, xx, -ax, -bx)
    da = _fsum(aa, xx, -2.0 * ax)
    db = _fsum(bb, xx, -2.0 * bx)
    if da <= 0.0 or db <= 0.0:
        raise TheoryError("undefined: counterfactual equals the input")
    return float(num / np.sqrt(da * db))


def cosine_of_deltas(x, x_cf, x_cf_new) -> float:
    """Compact form of :func:`cosine_from_counterfactuals`."""
    x = _vec(x)
    a, b = _vec(x_cf) - x, _vec(x_cf_new) - x
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise TheoryError("undefined: counterfactual equals the input")
    return float((a @ b) / (na * nb))


def _check_unit(w, name):
    if abs(np.linalg.norm(w) - 1.0) > UNIT_TOL:
        raise TheoryError(f"{name} must have unit Euclidean norm")


def cf_change_bound(x, w, w_new):
    """Return ``(lhs, rhs)`` of the counterfactual-change bound.

    ``lhs = |CF(x, w) - CF(x, w_new)|`` and
    ``rhs = sqrt(8) |x| sqrt(1 - cos(w, w_new))``.
    """
    x, w, w_new = _vec(x), _vec(w), _vec(w_new)
    if not (x.shape == w.shape == w_new.shape):
        raise TheoryError("dimension mismatch")
    _check_unit(w, "w")
    _check_unit(w_new, "w_new")
    lhs = np.linalg.norm(closest_counterfactual(x, w) - closest_counterfactual(x, w_new))
    cos = min(1.0, max(-1.0, float(w @ w_new)))
    rhs = np.sqrt(8.0) * np.linalg.norm(x) * np.sqrt(1.0 - cos)
    return float(lhs), float(rhs)


@dataclass(frozen=True)
class TheoremReport:
    trials: int
    dims: int
    seed: int
    max_abs_error: float
    violations: int
    worst_margin: float

    def to_dict(self) -> dict:
        return asdict(self)


def _units(rs, n, d):
    v = rs.normal(size=(n, d))
    norms = np.linalg.norm(v, axis=1)
    while np.any(norms <= 1e-8):
        bad = norms <= 1e-8
        v[bad] = rs.normal(size=(int(bad.sum()), d))
        norms = np.linalg.norm(v, axis=1)
    return v / norms[:, None]


def verify_theorems(trials: int = 1000, dims: int = 2, seed: int = 0,
                    same_model: bool = False) -> TheoremReport:
    """Check both results on seeded random ``(w, w_new, x)`` instances.

    ``x`` is redrawn until both models assign it the same side, the setting
    in which the weight-cosine identity holds (on opposite sides the
    counterfactual directions are negated). ``worst_margin`` is the smallest
    ``rhs - lhs`` seen.
    """
    if trials < 1:
        raise TheoryError("trials must be at least 1")
    if dims < 2:
        raise TheoryError("dims must be at least 2")
    rs = Stream(seed)
    W = _units(rs, trials, dims)
    W_new = W.copy() if same_model else _units(rs, trials, dims)
    X = rs.normal(size=(trials, dims))
    while True:
        bad = np.einsum("ij,ij->i", W, X) * np.einsum("ij,ij->i", W_new, X) <= 0.0
        if not bad.any():
            break
        X[bad] = rs.normal(size=(int(bad.sum()), dims))
    max_err, violations, worst = 0.0, 0, np.inf
    for w, w_new, x in zip(W, W_new, X):
        cos_est = cosine_from_counterfactuals(x, closest_counterfactual(x, w),
                                              closest_counterfactual(x, w_new))
        max_err = max(max_err, abs(cos_est - float(w @ w_new)))
        lhs, rhs = cf_change_bound(x, w, w_new)
        if lhs > rhs + BOUND_TOL:
            violations += 1
        worst = min(worst, rhs - lhs)
    return TheoremReport(trials, dims, int(seed), float(max_err), violations, float(worst))
