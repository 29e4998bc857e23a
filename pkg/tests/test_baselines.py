import numpy as np
import pytest

from footprint.classifiers.baselines import (
    BASELINE_KINDS,
    GaussianNBModel,
    KNNModel,
    TreeModel,
    UnsupportedKind,
    train_baseline,
)
from footprint.classifiers.forest import SingleClassTrainingSet, TrainConfig, train_tree


def blobs(seed=0, n=60, d=3, gap=6.0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(c * gap, 1.0, (n, d)) for c in range(4)])
    return X, np.repeat(np.arange(4), n)


def test_knn_one_neighbour_memorizes():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(80, 4))
    y = rng.integers(0, 4, 80)
    m = train_baseline("knn", X, y, {"k": 1})
    assert isinstance(m, KNNModel) and np.all(m.predict_labels(X) == y)


def test_naive_bayes_on_separated_gaussians():
    rng = np.random.default_rng(2)
    n = 10_000
    y = rng.integers(0, 2, n)
    X = rng.normal(0, 1, (n, 2)) + np.where(y[:, None] == 1, 8.0, 0.0)
    m = train_baseline("naive-bayes", X[: n // 2], y[: n // 2])
    assert isinstance(m, GaussianNBModel)
    assert np.mean(m.predict_labels(X[n // 2:]) == y[n // 2:]) >= 0.99


def test_decision_tree_is_plain_cart():
    X, y = blobs(gap=1.0)
    m = train_baseline("decision-tree", X, y, {"max_depth": 4})
    ref = train_tree(X, y, TrainConfig(max_depth=4, bootstrap=False), 0)
    assert isinstance(m, TreeModel) and m.tree.to_json() == ref.to_json()


@pytest.mark.parametrize("kind", BASELINE_KINDS)
def test_every_kind_fits_separable_data(kind):
    X, y = blobs()
    m = train_baseline(kind, X, y)
    P = m.predict_proba(X)
    assert P.shape == (len(X), 4) and np.allclose(P.sum(axis=1), 1.0)
    assert np.mean(m.predict_labels(X) == y) >= 0.95
    assert len(m.predictions([str(i) for i in range(3)], X[:3])) == 3


def test_constant_feature_naive_bayes_survives():
    X, y = blobs()
    X[:, 1] = 3.0
    m = train_baseline("naive-bayes", X, y)
    assert np.all(np.isfinite(m.predict_proba(X)))


def test_unsupported_and_single_class():
    X, y = blobs(n=5)
    with pytest.raises(UnsupportedKind):
        train_baseline("svm", X, y)
    with pytest.raises(SingleClassTrainingSet):
        train_baseline("knn", X, np.zeros(len(X), dtype=int))
    with pytest.raises(ValueError):
        train_baseline("knn", X, y, {"k": 0})
