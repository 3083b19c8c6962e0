import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptcf.data import BlobSpec, Dataset, Task, generate_gaussian_blobs
from adaptcf.models import (AdaptationConfig, ConvergenceWarning, GaussianNB, LinearClassifier,
                            LogisticRegression, ModelError,
                            NonDifferentiableError, adapt, decision_function, fit, gradient,
                            load_model, model_from_dict, model_to_dict, predict, save_model)
from adaptcf.rng import Stream

from conftest import linear, stump


def _separable(seed=0, n=40):
    rs = Stream(seed)
    X = np.vstack([rs.normal([-3, 1], 0.5, size=(n, 2)), rs.normal([3, -1], 0.5, size=(n, 2))])
    y = np.repeat([0, 1], n)
    return Dataset(X, y, ("a", "b"))


def test_linear_classifier_separable():
    d = _separable()
    m = fit("linear_classifier", d)
    assert (m.predict_batch(d.features) == d.labels).all()
    assert np.linalg.norm(m.coef) == pytest.approx(1.0, abs=1e-12)


def test_unit_norm_enforced():
    m = LinearClassifier(np.array([3.0, 4.0]), 5.0)
    assert m.coef.tolist() == [0.6, 0.8]
    assert m.intercept == 1.0


def test_gnb_fits_blob_batch1(blobs):
    b1 = blobs[0]
    m = fit("gaussian_nb", b1)
    assert (m.predict_batch(b1.features) == b1.labels).mean() >= 0.95


def test_linear_regression_exact():
    x = np.arange(10.0)
    X = np.column_stack([x, np.sin(x)])
    d = Dataset(X, 2 * x + 1, ("x1", "x2"), Task.REGRESSION)
    m = fit("linear_regression", d)
    assert np.allclose(m.coef, [2.0, 0.0], atol=1e-8)
    assert m.intercept == pytest.approx(1.0, abs=1e-8)
    assert m.n_classes is None


def test_predict_examples():
    m = linear([1, 0])
    assert predict(m, [2, 3]) == 1
    assert predict(m, [-1, 5]) == 0
    assert predict(stump(), [0.5, 9]) == 1
    assert predict(stump(), [0.0, 9]) == 0


def test_tie_goes_to_class_one():
    assert predict(linear([1, 0]), [0.0, 4.0]) == 1


def test_decision_function_examples():
    assert decision_function(linear([0.6, 0.8]), [1, 1]) == pytest.approx(1.4, abs=1e-15)
    gnb = GaussianNB([0.5, 0.5], [[-1.0, 0.0], [1.0, 0.0]], [[1.0, 1.0], [1.0, 1.0]])
    assert decision_function(gnb, [0.0, 3.0]) == pytest.approx(0.0, abs=1e-12)
    lr = LogisticRegression(np.array([2.0, -1.0]), 0.5)
    x = np.array([0.0, 0.5])
    assert lr.predict_proba(x) == pytest.approx(0.5)
    assert decision_function(lr, x) == pytest.approx(0.0, abs=1e-15)


def test_tree_has_no_gradient():
    with pytest.raises(NonDifferentiableError, match="non-differentiable family"):
        gradient(stump(), [0.0, 0.0])
    with pytest.raises(NonDifferentiableError, match="non-differentiable family"):
        decision_function(stump(), [0.0, 0.0])


def test_affine_gradients_are_constant():
    w = np.array([0.6, 0.8])
    assert np.array_equal(gradient(linear(w), [5, -7]), w)
    lr = LogisticRegression(np.array([2.0, -1.0, 0.3]), 0.5)
    assert np.array_equal(gradient(lr, [1, 2, 3]), lr.coef)


def _fd(model, x, h=1e-5):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (model.decision_function(x + e) - model.decision_function(x - e)) / (2 * h)
    return g


def test_gnb_gradient_matches_finite_differences(blob_models):
    rs = Stream(11)
    for m in blob_models:
        for x in rs.uniform(-4, 4, size=(20, 2)):
            a, n = m.gradient(x), _fd(m, x)
            assert np.linalg.norm(a - n) <= 1e-5 * max(np.linalg.norm(a), 1e-3)


def test_gnb_multiclass_one_vs_rest_gradient():
    rs = Stream(3)
    X = np.vstack([rs.normal(c, 1.0, size=(30, 3)) for c in ([0, 0, 0], [3, 0, 1], [0, 3, -1])])
    m = fit("gaussian_nb", Dataset(X, np.repeat([0, 1, 2], 30), ("a", "b", "c")))
    for x in rs.uniform(-2, 4, size=(10, 3)):
        for t in range(3):
            e = 1e-5
            num = np.array([(m.decision_function(x + e * u, t) - m.decision_function(x - e * u, t)) / (2 * e)
                            for u in np.eye(3)])
            assert np.allclose(m.gradient(x, t), num, rtol=1e-5, atol=1e-7)
    assert set(m.predict_batch(X).tolist()) == {0, 1, 2}


def test_adapt_pure_refit_limit():
    old = fit("logistic_regression", _separable(0))
    new_data = Dataset(_separable(1).features[:, ::-1], _separable(1).labels, ("a", "b"))
    m = adapt(old, new_data, AdaptationConfig(C=1.0, proximity_weight=0.0))
    assert (m.predict_batch(new_data.features) == new_data.labels).mean() >= 0.95


def test_adapt_with_zero_C_keeps_parameters():
    old = fit("logistic_regression", _separable(0))
    m = adapt(old, _separable(5), AdaptationConfig(C=0.0))
    assert np.array_equal(m.theta, old.theta)


def test_adapt_objective_does_not_increase():
    old = fit("linear_classifier", _separable(0))
    data = Dataset(_separable(2).features[:, ::-1], _separable(2).labels, ("a", "b"))
    m = adapt(old, data)
    trace = m.info["trace"]
    assert all(b <= a for a, b in zip(trace, trace[1:]))
    assert m.info["objective"] <= m.info["initial_objective"]
    assert np.linalg.norm(m.coef) == pytest.approx(1.0, abs=1e-12)


def test_gnb_adaptation_generalises(blob_models):
    _, new = blob_models
    test_b2 = generate_gaussian_blobs(BlobSpec(seed=1042))[1]
    assert (new.predict_batch(test_b2.features) == test_b2.labels).mean() >= 0.9


def test_tree_adaptation_is_refit(blobs):
    b1, b2, _ = blobs
    old = fit("decision_tree", b1)
    new = adapt(old, b2)
    both = fit("decision_tree", b1.concat(b2))
    assert new.same_parameters(both)


def test_adapt_family_mismatch(blobs):
    old = fit("gaussian_nb", blobs[0])
    with pytest.raises(ModelError, match="family mismatch"):
        adapt(old, blobs[1], family="decision_tree")


def test_adapt_warns_when_not_converged(blobs):
    old = fit("logistic_regression", blobs[0])
    with pytest.warns(ConvergenceWarning):
        m = adapt(old, blobs[1], AdaptationConfig(max_iters=1))
    assert m.info["converged"] is False


def test_fit_errors():
    d = _separable()
    with pytest.raises(ModelError, match="two classes"):
        fit("gaussian_nb", Dataset(d.features, np.zeros(len(d), dtype=int), d.feature_names))
    with pytest.raises(ModelError, match="zero total"):
        fit("logistic_regression", d, np.zeros(len(d)))
    with pytest.raises(ModelError):
        fit("linear_regression", d)
    with pytest.raises(ValueError):
        linear([1, 0]).predict([1, 2, 3])


def test_weighted_fit_ignores_zero_weight_rows():
    d = _separable()
    w = np.ones(len(d))
    w[:5] = 0.0
    a = fit("decision_tree", d, w)
    b = fit("decision_tree", d.subset(range(5, len(d))))
    assert a.predict_batch(d.features).tolist() == b.predict_batch(d.features).tolist()


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2), st.floats(-3, 3),
       st.lists(st.floats(-10, 10), min_size=2, max_size=2))
def test_sign_coherence(w, b, x):
    if np.linalg.norm(w) < 1e-3:
        return
    for m in (LinearClassifier(np.array(w), b), LogisticRegression(np.array(w), b)):
        f = m.decision_function(x)
        if f != 0.0:
            assert m.predict(x) == int(f > 0)


def _all_families(blobs):
    b1 = blobs[0]
    reg = Dataset(b1.features, b1.features @ [1.5, -0.5] + 0.25, b1.feature_names, Task.REGRESSION)
    return [fit("linear_classifier", b1), fit("logistic_regression", b1),
            fit("linear_regression", reg), fit("gaussian_nb", b1), fit("decision_tree", b1)]


def test_serialisation_round_trips_bits(blobs, tmp_path):
    for m in _all_families(blobs):
        p = tmp_path / f"{m.family.value}.json"
        save_model(m, p)
        back = load_model(p)
        assert type(back) is type(m)
        assert back.same_parameters(m)
        assert json.dumps(model_to_dict(back)) == json.dumps(model_to_dict(m))
        X = blobs[2].features
        assert np.array_equal(back.predict_batch(X), m.predict_batch(X))


def test_model_document_versioning(blobs):
    doc = model_to_dict(fit("gaussian_nb", blobs[0]))
    doc["version"] = 99
    with pytest.raises(ModelError, match="version"):
        model_from_dict(doc)
    with pytest.raises(ModelError):
        model_from_dict({"format": "other"})


def test_models_are_immutable(blobs):
    m = fit("logistic_regression", blobs[0])
    with pytest.raises(ValueError):
        m.coef[0] = 1.0
