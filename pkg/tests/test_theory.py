import math

import numpy as np
import pytest

from adaptcf.counterfactuals import counterfactual, default_target
from adaptcf.rng import Stream
from adaptcf.theory import (TheoryError, cf_change_bound, closest_counterfactual,
                            cosine_from_counterfactuals, cosine_of_deltas, verify_theorems)


def test_closest_counterfactual_is_projection():
    assert closest_counterfactual([1.0, 1.0], [1.0, 0.0]).tolist() == [0.0, 1.0]
    w = np.array([0.6, 0.8])
    z = closest_counterfactual([3.0, -1.0], w)
    assert abs(w @ z) < 1e-15


def test_cosine_examples():
    x = np.array([1.0, 1.0])
    a = closest_counterfactual(x, [1.0, 0.0])
    b = closest_counterfactual(x, [0.0, 1.0])
    assert a.tolist() == [0.0, 1.0] and b.tolist() == [1.0, 0.0]
    assert cosine_from_counterfactuals(x, a, b) == 0.0
    assert cosine_from_counterfactuals(x, a, a) == 1.0


def test_cosine_undefined_at_input():
    with pytest.raises(TheoryError, match="undefined"):
        cosine_from_counterfactuals([1.0, 2.0], [1.0, 2.0], [0.0, 0.0])
    with pytest.raises(TheoryError, match="undefined"):
        cosine_of_deltas([1.0, 2.0], [0.0, 0.0], [1.0, 2.0])
    with pytest.raises(TheoryError):
        cosine_from_counterfactuals([1.0], [0.0, 0.0], [0.0, 0.0])


def test_expanded_matches_compact():
    rs = Stream(4)
    for d in (2, 5, 20):
        for _ in range(200):
            x, a, b = rs.normal(size=(3, d))
            assert abs(cosine_from_counterfactuals(x, a, b) - cosine_of_deltas(x, a, b)) < 1e-12


def test_expanded_form_recovers_weight_cosine():
    rs = Stream(8)
    for d in (2, 5, 20):
        for _ in range(200):
            w, v = (u / np.linalg.norm(u) for u in rs.normal(size=(2, d)))
            x = rs.normal(size=d)
            if (w @ x) * (v @ x) <= 0:
                continue
            est = cosine_from_counterfactuals(x, closest_counterfactual(x, w),
                                              closest_counterfactual(x, v))
            assert abs(est - w @ v) < 1e-9


def test_bound_hand_instance():
    lhs, rhs = cf_change_bound([1.0, 1.0], [1.0, 0.0], [0.0, 1.0])
    assert abs(lhs - math.sqrt(2.0)) < 1e-12 and abs(rhs - 4.0) < 1e-12


def test_bound_identical_models():
    assert cf_change_bound([3.0, -2.0], [0.6, 0.8], [0.6, 0.8]) == (0.0, 0.0)


def test_bound_scales_linearly():
    rs = Stream(1)
    for _ in range(50):
        w, v = (u / np.linalg.norm(u) for u in rs.normal(size=(2, 4)))
        x = rs.normal(size=4)
        assert cf_change_bound(2 * x, w, v)[1] == 2 * cf_change_bound(x, w, v)[1]


def test_bound_holds_on_random_instances():
    rs = Stream(12)
    for _ in range(1000):
        w, v = (u / np.linalg.norm(u) for u in rs.normal(size=(2, 5)))
        lhs, rhs = cf_change_bound(rs.normal(size=5), w, v)
        assert lhs <= rhs + 1e-12


def test_bound_rejects_bad_weights():
    with pytest.raises(TheoryError, match="unit"):
        cf_change_bound([1.0, 1.0], [2.0, 0.0], [0.0, 1.0])
    with pytest.raises(TheoryError, match="unit"):
        cf_change_bound([1.0, 1.0], [1.0, 0.0], [0.0, 1.0 + 1e-9])
    with pytest.raises(TheoryError):
        cf_change_bound([1.0, 1.0, 1.0], [1.0, 0.0], [0.0, 1.0])


def test_verify_theorems():
    for d in (2, 5, 20):
        rep = verify_theorems(1000, d, seed=7)
        assert rep.violations == 0 and rep.max_abs_error < 1e-9 and rep.worst_margin >= 0
        assert rep.trials == 1000 and rep.dims == d and rep.seed == 7


def test_verify_theorems_identity_instance():
    rep = verify_theorems(1, 3, seed=0, same_model=True)
    assert rep.max_abs_error <= 1e-15 and rep.violations == 0


def test_verify_theorems_deterministic():
    assert verify_theorems(50, 4, seed=3).to_dict() == verify_theorems(50, 4, seed=3).to_dict()
    assert verify_theorems(50, 4, seed=3) != verify_theorems(50, 4, seed=4)


def test_verify_theorems_validation():
    with pytest.raises(TheoryError):
        verify_theorems(0, 2)
    with pytest.raises(TheoryError):
        verify_theorems(10, 1)


def test_estimator_on_naive_bayes(blob_models, blobs):
    # no tolerance exists for nonlinear models; only check it yields a cosine
    old, new = blob_models
    for x in blobs[2].features[:10]:
        ra = counterfactual(old, x, default_target(old, x))
        rb = counterfactual(new, x, default_target(new, x))
        if not (ra.valid and rb.valid):
            continue
        c = cosine_from_counterfactuals(x, ra.x_cf, rb.x_cf)
        assert -1.0 - 1e-12 <= c <= 1.0 + 1e-12
