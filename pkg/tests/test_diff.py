import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptcf.counterfactuals import Interval
from adaptcf.data import Dataset, Task
from adaptcf.diff import (DiffError, comparable_indices, explain_model_differences,
                          explanation_delta, psi_compare, psi_cosine, psi_euclid)
from adaptcf.models import LinearRegression, fit

from conftest import linear

vec = st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3).map(np.array)


def test_psi_compare_examples():
    assert psi_compare([1, 2], [1, 2]).tolist() == [0, 0]
    assert psi_compare([-2, 0], [0, -2]).tolist() == [2, 2]
    assert psi_compare([0, 0], [3, -4]).tolist() == [3, 4]


def test_psi_euclid_examples():
    assert psi_euclid([1, 2], [1, 2]) == 0.0
    assert psi_euclid([-2, 0], [0, -2]) == pytest.approx(np.sqrt(8), abs=1e-15)
    assert psi_euclid([-2, 0], [0, -2], p=1) == 4.0


def test_psi_cosine_examples():
    d = np.array([0.3, -1.7, 2.2])
    assert psi_cosine(d, 5 * d) == 1.0
    assert psi_cosine([1, 0], [0, 1]) == 0.0
    assert psi_cosine([1, 0], [-1, 0]) == -1.0
    with pytest.raises(DiffError, match="undefined angle"):
        psi_cosine([0, 0], [1, 0])


def test_dimension_mismatch():
    for f in (psi_compare, psi_euclid, psi_cosine):
        with pytest.raises(DiffError, match="dimension mismatch"):
            f([1, 2], [1, 2, 3])


@settings(max_examples=100, deadline=None)
@given(vec, vec, vec)
def test_euclid_symmetry_and_triangle(a, b, c):
    assert psi_euclid(a, b) == psi_euclid(b, a)
    assert psi_euclid(a, c) <= psi_euclid(a, b) + psi_euclid(b, c) + 1e-9


@settings(max_examples=200, deadline=None)
@given(vec, vec, st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_cosine_symmetry_and_scale_invariance(a, b, s, t):
    if np.linalg.norm(a) < 1e-6 or np.linalg.norm(b) < 1e-6:
        return
    c = psi_cosine(a, b)
    assert c == psi_cosine(b, a)
    assert -1.0 <= c <= 1.0
    assert abs(psi_cosine(s * a, t * b) - c) <= 1e-12


def test_explanation_delta_examples(blob_models):
    d, res = explanation_delta(linear([1, 0]), [2, 3])
    assert d == pytest.approx([-2, 0], abs=1e-3)
    reg = LinearRegression(np.array([1.0, 0.0]), 0.0)
    d, res = explanation_delta(reg, [20.0, 1.0], Interval(20, 5))
    assert d.tolist() == [0.0, 0.0] and res.valid
    d, res = explanation_delta(blob_models[0], [0.5, 0.5])
    assert np.linalg.norm(d) > 0 and res.valid
    assert blob_models[0].predict(res.x_cf) == res.target


def test_self_comparison_is_zero(blobs):
    m = fit("logistic_regression", blobs[0])
    rep = explain_model_differences(m, m, blobs[2])
    assert rep.per_sample
    for e in rep.per_sample:
        assert e.psi_euclid == 0.0 and e.psi_cosine == 1.0
        assert not e.psi.any()


def test_filter_and_bookkeeping(blobs, blob_models, blob_report):
    old, new = blob_models
    ev = blobs[2]
    rep = blob_report
    assert len(rep.per_sample) + len(rep.skipped) == len(ev)
    for e in rep.per_sample:
        assert old.predict(e.x) == e.label == new.predict(e.x)
        assert e.psi.tolist() == np.abs(e.delta_old - e.delta_new).tolist()
        assert e.psi_euclid == np.linalg.norm(e.delta_old - e.delta_new)
    reasons = {r for _, r in rep.skipped}
    assert reasons <= {"misclassified by old model", "misclassified by new model", "invalid counterfactual"}
    assert [e.index for e in rep.per_sample] == comparable_indices(old, new, ev)


def test_feature_two_dominates(blob_report):
    rep = blob_report
    assert rep.mean_psi[1] > rep.mean_psi[0]


def test_nothing_comparable():
    d = Dataset([[1.0, 0.0], [-1.0, 0.0]], [0, 1], ("a", "b"))
    rep = explain_model_differences(linear([1, 0]), linear([1, 0]), d)
    assert rep.per_sample == [] and len(rep.skipped) == 2
    assert rep.mean_psi.tolist() == [0.0, 0.0]


def test_zero_delta_flags_cosine():
    reg_old = LinearRegression(np.array([1.0, 0.0]), 0.0)
    reg_new = LinearRegression(np.array([0.0, 1.0]), 0.0)
    d = Dataset([[20.0, 40.0], [40.0, 20.0]], [0.0, 0.0], ("a", "b"), Task.REGRESSION)
    rep = explain_model_differences(reg_old, reg_new, d, Interval(20, 1))
    assert len(rep.per_sample) == 2
    assert rep.per_sample[0].psi_cosine is None
    assert not rep.per_sample[0].cosine_defined


def test_incompatible_models(blobs):
    reg = LinearRegression(np.array([1.0, 0.0, 0.0]), 0.0)
    with pytest.raises(DiffError):
        explain_model_differences(linear([1, 0]), reg, blobs[2])


def test_report_files(tmp_path, blobs, blob_models):
    rep = explain_model_differences(*blob_models, blobs[2], indices=range(20))
    rep.write_json(tmp_path / "r.json")
    rep.write_plot_data(tmp_path / "p.csv")
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["n_compared"] + doc["n_skipped"] == 20
    rows = list(csv.reader(open(tmp_path / "p.csv")))
    assert rows[0] == ["feature", "mean_psi", "mean_abs_change"]
    assert [r[0] for r in rows[1:]] == ["x1", "x2"]
    assert float(rows[1][1]) == rep.mean_psi[0]
