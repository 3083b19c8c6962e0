import numpy as np
import pytest

from adaptcf.diff import explain_model_differences
from adaptcf.data import generate_credit_like, generate_gaussian_blobs
from adaptcf.models import LinearClassifier, adapt, fit
from adaptcf.models.tree import DecisionTree


@pytest.fixture(scope="session")
def blobs():
    return generate_gaussian_blobs()


@pytest.fixture(scope="session")
def blob_models(blobs):
    b1, b2, _ = blobs
    old = fit("gaussian_nb", b1)
    return old, adapt(old, b2)


@pytest.fixture(scope="session")
def blob_report(blobs, blob_models):
    return explain_model_differences(*blob_models, blobs[2])


@pytest.fixture(scope="session")
def credit():
    return generate_credit_like()


def linear(w, b=0.0):
    return LinearClassifier(np.asarray(w, dtype=float), b)


def stump(feature=0, threshold=0.0, left=0, right=1, n_features=2):
    """Single split: ``x[feature] <= threshold`` goes left."""
    return DecisionTree(feature=[feature, -1, -1], threshold=[threshold, 0.0, 0.0],
                        left=[1, -1, -1], right=[2, -1, -1], value=[0, left, right],
                        n_features=n_features)
