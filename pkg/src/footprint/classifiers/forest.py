"""Random forest: bootstrap samples, random feature subsets, majority vote."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from footprint.categories import CATEGORIES
from footprint.classifiers.base import Classifier, DimensionMismatch, Prediction
from footprint.classifiers.tree import Tree, grow_tree

MODEL_FORMAT = "footprint.forest"
MODEL_VERSION = 1


class SingleClassTrainingSet(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    features_per_split: int | None = None  # None -> ceil(sqrt(d))
    bootstrap: bool = True
    class_weighting: str = "none"  # or "inverse-frequency"
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.class_weighting not in ("none", "inverse-frequency"):
            raise ValueError(f"unknown class_weighting {self.class_weighting!r}")

    def resolved_features(self, d: int) -> int:
        fps = math.ceil(math.sqrt(d)) if self.features_per_split is None else self.features_per_split
        if not 1 <= fps <= d:
            raise ValueError(f"features_per_split {fps} not in [1, {d}]")
        return fps

    def with_(self, **changes) -> TrainConfig:
        return replace(self, **changes)


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    """Independent stream per (forest seed, tree index)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), tree_index]))


def class_weights(y: np.ndarray, n_classes: int) -> np.ndarray:
    """Inverse-frequency weights, n / (classes present * count_c)."""
    counts = np.bincount(y, minlength=n_classes).astype(float)
    present = np.count_nonzero(counts)
    w = np.zeros(n_classes)
    nz = counts > 0
    w[nz] = len(y) / (present * counts[nz])
    return w


def train_tree(X: np.ndarray, y: np.ndarray, config: TrainConfig, seed: int,
               n_classes: int = len(CATEGORIES), features_per_split: int | None = None,
               sample_weight: np.ndarray | None = None) -> Tree:
    """One tree on (X, y) as given (no resampling), randomness from ``seed``.

    ``features_per_split`` defaults to every feature, which makes the tree a
    plain CART tree.
    """
    X = np.asarray(X, dtype=float)
    fps = X.shape[1] if features_per_split is None else features_per_split
    return grow_tree(X, y, n_classes, np.random.default_rng(seed), config.max_depth,
                     config.min_samples_split, fps, sample_weight)


@dataclass
class ForestModel(Classifier):
    trees: list[Tree]
    config: TrainConfig
    feature_names: list[str]
    classes: list[str] = field(default_factory=lambda: [c.value for c in CATEGORIES])
    oob_accuracy: list[float | None] = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def votes(self, X: np.ndarray) -> np.ndarray:
        X = self._check(X)
        v = np.zeros((len(X), self.n_classes))
        rows = np.arange(len(X))
        for t in self.trees:
            v[rows, t.predict_labels(X)] += 1
        return v

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.votes(X) / len(self.trees)

    def to_json(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "config": asdict(self.config),
            "feature_names": list(self.feature_names),
            "classes": list(self.classes),
            "oob_accuracy": list(self.oob_accuracy),
            "trees": [t.to_json() for t in self.trees],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())
            fh.write("\n")

    @classmethod
    def from_json(cls, obj: dict) -> ForestModel:
        if obj.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a forest model: format={obj.get('format')!r}")
        if obj.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {obj.get('version')!r}")
        classes = list(obj["classes"])
        return cls(
            trees=[Tree.from_json(t, len(classes)) for t in obj["trees"]],
            config=TrainConfig(**obj["config"]),
            feature_names=list(obj["feature_names"]),
            classes=classes,
            oob_accuracy=list(obj.get("oob_accuracy", [])),
        )

    @classmethod
    def load(cls, path: str | os.PathLike) -> ForestModel:
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def train_forest(X: np.ndarray, y: np.ndarray, config: TrainConfig = TrainConfig(),
                 feature_names: Sequence[str] | None = None, n_classes: int = len(CATEGORIES),
                 threads: int = 1) -> ForestModel:
    """Grow ``config.n_trees`` trees independently.

    Tree i draws its bootstrap sample and its per-node feature subsets from
    ``tree_rng(config.seed, i)``, so the model does not depend on ``threads``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D with one row per label")
    if len(np.unique(y)) < 2:
        raise SingleClassTrainingSet("forest needs at least two classes")
    n, d = X.shape
    fps = config.resolved_features(d)
    cw = class_weights(y, n_classes) if config.class_weighting == "inverse-frequency" else None

    def one(i: int):
        rng = tree_rng(config.seed, i)
        idx = rng.integers(0, n, size=n) if config.bootstrap else np.arange(n)
        sw = cw[y[idx]] if cw is not None else None
        tree = grow_tree(X[idx], y[idx], n_classes, rng, config.max_depth,
                         config.min_samples_split, fps, sw)
        oob = None
        if config.bootstrap:
            mask = np.ones(n, dtype=bool)
            mask[idx] = False
            if mask.any():
                oob = float(np.mean(tree.predict_labels(X[mask]) == y[mask]))
        return tree, oob

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(config.n_trees)))
    else:
        results = [one(i) for i in range(config.n_trees)]
    names = list(feature_names) if feature_names is not None else [f"f{j}" for j in range(d)]
    return ForestModel(
        trees=[t for t, _ in results],
        config=config,
        feature_names=names,
        classes=[c.value for c in CATEGORIES[:n_classes]] if n_classes <= len(CATEGORIES)
        else [str(c) for c in range(n_classes)],
        oob_accuracy=[o for _, o in results],
    )


def predict(model: Classifier, vector, account_id: str | None = None) -> Prediction:
    """Vote distribution and winning category for one feature vector.

    Accepts a ``FeatureVector`` or a plain sequence of values.
    """
    values = getattr(vector, "values", vector)
    aid = account_id if account_id is not None else getattr(vector, "account_id", "")
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or len(x) != len(model.feature_names):
        raise DimensionMismatch(f"expected {len(model.feature_names)} features, got {x.shape}")
    return model.predictions([aid], x[None, :])[0]
