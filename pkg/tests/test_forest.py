import json

import numpy as np
import pytest

from footprint.categories import Category
from footprint.classifiers.base import DimensionMismatch
from footprint.classifiers.forest import (
    ForestModel,
    SingleClassTrainingSet,
    TrainConfig,
    class_weights,
    predict,
    train_forest,
)
from footprint.classifiers.tree import Tree
from footprint.features import FeatureVector

FN, ORG, PA, DI = Category.FAKE_NEWS, Category.ORGANIZATIONS, Category.POLITICAL_AFFILIATES, \
    Category.DEFAULT_INDIVIDUALS


def blobs(seed=0, n=50, d=4, spread=1.0):
    rng = np.random.default_rng(seed)
    centers = rng.normal(0, 4, (4, d))
    X = np.vstack([rng.normal(c, spread, (n, d)) for c in centers])
    return X, np.repeat(np.arange(4), n)


def stump(feature, thr, left, right):
    """Hand-built one-split tree over 4 classes."""
    lv = [0.0] * 4
    rv = [0.0] * 4
    lv[left] = rv[right] = 1.0
    return Tree.from_json([["split", feature, thr, [a + b for a, b in zip(lv, rv)]], ["leaf", lv], ["leaf", rv]], 4)


class TestTrain:
    def test_threads_bit_identical(self):
        X, y = blobs()
        cfg = TrainConfig(n_trees=24, seed=5)
        a, b = train_forest(X, y, cfg, threads=1), train_forest(X, y, cfg, threads=8)
        assert a.dumps() == b.dumps()
        assert np.array_equal(a.predict_proba(X), b.predict_proba(X))

    def test_seed_changes_model(self):
        X, y = blobs()
        assert train_forest(X, y, TrainConfig(n_trees=5, seed=1)).dumps() != \
            train_forest(X, y, TrainConfig(n_trees=5, seed=2)).dumps()

    def test_shape_invariants(self):
        X, y = blobs(d=5)
        m = train_forest(X, y, TrainConfig(n_trees=7))
        assert len(m.trees) == 7 and len(m.oob_accuracy) == 7
        assert all(np.all(t.feature < 5) for t in m.trees)
        assert TrainConfig().resolved_features(8) == 3

    def test_separable_accuracy(self):
        X, y = blobs(spread=0.5)
        m = train_forest(X, y, TrainConfig(n_trees=20))
        assert np.mean(m.predict_labels(X) == y) == 1.0

    def test_single_class(self):
        with pytest.raises(SingleClassTrainingSet):
            train_forest(np.zeros((3, 2)), np.array([1, 1, 1]))

    def test_config_validation(self):
        for bad in ({"n_trees": 0}, {"max_depth": -1}, {"min_samples_split": 1}, {"class_weighting": "x"}):
            with pytest.raises(ValueError):
                TrainConfig(**bad)
        with pytest.raises(ValueError):
            TrainConfig(features_per_split=9).resolved_features(8)

    def test_class_weights(self):
        w = class_weights(np.array([0, 0, 0, 1]), 4)
        assert w.tolist() == [4 / 6, 2.0, 0.0, 0.0]
        X, y = blobs(n=20)
        m = train_forest(X, y, TrainConfig(n_trees=3, class_weighting="inverse-frequency"))
        assert len(m.trees) == 3

    def test_no_bootstrap_has_no_oob(self):
        X, y = blobs(n=10)
        assert train_forest(X, y, TrainConfig(n_trees=2, bootstrap=False)).oob_accuracy == [None, None]


class TestPredict:
    def model(self, trees):
        return ForestModel(trees, TrainConfig(n_trees=len(trees)), ["x", "y"])

    def test_three_tree_vote(self):
        m = self.model([stump(0, 0.5, 0, 2), stump(1, 0.5, 0, 3), stump(0, -1.0, 1, 2)])
        p = predict(m, FeatureVector("acc", (0.0, 0.0), ("x", "y")))
        assert p.account_id == "acc" and p.category is FN
        assert p.distribution[FN] == pytest.approx(2 / 3) and p.distribution[PA] == pytest.approx(1 / 3)
        assert sum(p.distribution.values()) == pytest.approx(1.0, abs=1e-9)

    def test_single_tree_equals_leaf_majority(self):
        X, y = blobs(n=15)
        m = train_forest(X, y, TrainConfig(n_trees=1))
        assert np.array_equal(m.predict_labels(X), m.trees[0].predict_labels(X))

    def test_unanimous(self):
        p = predict(self.model([stump(0, 0.5, 3, 3)] * 3), [0.0, 9.0])
        assert p.category is DI and p.distribution[DI] == 1.0

    def test_even_vote_goes_to_earlier_category(self):
        p = predict(self.model([stump(0, 0.5, 2, 2), stump(0, 0.5, 1, 1)]), [0.0, 0.0])
        assert p.category is ORG

    def test_dimension_mismatch(self):
        m = self.model([stump(0, 0.5, 0, 1)])
        with pytest.raises(DimensionMismatch):
            predict(m, [1.0, 2.0, 3.0])
        with pytest.raises(DimensionMismatch):
            m.predict_proba(np.zeros((2, 3)))


class TestPersistence:
    def test_roundtrip(self, tmp_path):
        X, y = blobs(n=20)
        m = train_forest(X, y, TrainConfig(n_trees=4, max_depth=3, seed=9), feature_names=list("abcd"))
        m.save(tmp_path / "model.json")
        back = ForestModel.load(tmp_path / "model.json")
        assert back.dumps() == m.dumps()
        assert np.array_equal(back.predict_proba(X), m.predict_proba(X))
        obj = json.loads((tmp_path / "model.json").read_text())
        assert obj["trees"][0][0][0] in ("split", "leaf") and obj["feature_names"] == list("abcd")

    def test_rejects_foreign_json(self):
        with pytest.raises(ValueError):
            ForestModel.from_json({"format": "other"})
        with pytest.raises(ValueError):
            ForestModel.from_json({"format": "footprint.forest", "version": 99})
