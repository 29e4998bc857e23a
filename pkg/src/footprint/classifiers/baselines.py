"""Comparison classifiers behind the same predict contract as the forest."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from footprint.categories import CATEGORIES
from footprint.classifiers.base import Classifier
from footprint.classifiers.forest import SingleClassTrainingSet, TrainConfig, train_tree
from footprint.classifiers.tree import Tree

BASELINE_KINDS = ("logistic-regression", "knn", "decision-tree", "naive-bayes")
VARIANCE_FLOOR = 1e-9


class UnsupportedKind(ValueError):
    pass


@dataclass
class LogisticRegressionModel(Classifier):
    """Multinomial logistic regression on standardized inputs."""

    W: np.ndarray
    b: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    feature_names: list[str] = field(default_factory=list)

    def predict_proba(self, X):
        Z = (self._check(X) - self.mean) / self.scale
        logits = Z @ self.W + self.b
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        return e / e.sum(axis=1, keepdims=True)


def fit_logistic(X, y, n_classes, learning_rate=0.1, iterations=1000, l2=0.0, feature_names=None):
    """Batch gradient descent on the mean cross-entropy, zero-initialized."""
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (X - mean) / scale
    n, d = Z.shape
    Y = np.zeros((n, n_classes))
    Y[np.arange(n), y] = 1.0
    W = np.zeros((d, n_classes))
    b = np.zeros(n_classes)
    for _ in range(iterations):
        logits = Z @ W + b
        logits -= logits.max(axis=1, keepdims=True)
        P = np.exp(logits)
        P /= P.sum(axis=1, keepdims=True)
        G = (P - Y) / n
        W -= learning_rate * (Z.T @ G + l2 * W)
        b -= learning_rate * G.sum(axis=0)
    return LogisticRegressionModel(W, b, mean, scale, list(feature_names or []))


@dataclass
class KNNModel(Classifier):
    X: np.ndarray
    y: np.ndarray
    k: int
    n_classes: int
    feature_names: list[str] = field(default_factory=list)

    def predict_proba(self, X):
        Q = self._check(X)
        k = min(self.k, len(self.X))
        out = np.zeros((len(Q), self.n_classes))
        for lo in range(0, len(Q), 256):
            q = Q[lo:lo + 256]
            d2 = ((q[:, None, :] - self.X[None, :, :]) ** 2).sum(axis=2)
            # stable sort: equidistant neighbours keep training order
            nn = np.argsort(d2, axis=1, kind="stable")[:, :k]
            for r, idx in enumerate(nn):
                out[lo + r] = np.bincount(self.y[idx], minlength=self.n_classes) / k
        return out


@dataclass
class GaussianNBModel(Classifier):
    log_prior: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    feature_names: list[str] = field(default_factory=list)

    def predict_proba(self, X):
        Q = self._check(X)
        ll = -0.5 * (np.log(2 * np.pi * self.variances)[None, :, :]
                     + (Q[:, None, :] - self.means[None, :, :]) ** 2 / self.variances[None, :, :]).sum(axis=2)
        joint = ll + self.log_prior[None, :]
        joint -= joint.max(axis=1, keepdims=True)
        p = np.exp(joint)
        return p / p.sum(axis=1, keepdims=True)


def fit_gaussian_nb(X, y, n_classes, var_floor=VARIANCE_FLOOR, feature_names=None):
    X = np.asarray(X, dtype=float)
    d = X.shape[1]
    means = np.zeros((n_classes, d))
    variances = np.ones((n_classes, d))
    log_prior = np.full(n_classes, -np.inf)
    for c in range(n_classes):
        Xc = X[y == c]
        if len(Xc) == 0:
            continue
        log_prior[c] = np.log(len(Xc) / len(X))
        means[c] = Xc.mean(axis=0)
        variances[c] = np.maximum(Xc.var(axis=0), var_floor)
    return GaussianNBModel(log_prior, means, variances, list(feature_names or []))


@dataclass
class TreeModel(Classifier):
    tree: Tree
    feature_names: list[str] = field(default_factory=list)

    def predict_proba(self, X):
        X = self._check(X)
        P = np.zeros((len(X), self.tree.n_classes))
        P[np.arange(len(X)), self.tree.predict_labels(X)] = 1.0
        return P


def train_baseline(kind: str, X, y, params: Mapping[str, Any] | None = None,
                   n_classes: int = len(CATEGORIES), feature_names=None) -> Classifier:
    """Train one comparison classifier.

    ``logistic-regression``: ``learning_rate`` (0.1), ``iterations`` (1000).
    ``knn``: ``k`` (5), Euclidean distance.
    ``decision-tree``: a single unbagged CART tree over all features; ``max_depth``, ``seed``.
    ``naive-bayes``: Gaussian, variances floored at 1e-9.
    """
    p = dict(params or {})
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if kind not in BASELINE_KINDS:
        raise UnsupportedKind(f"unsupported classifier kind {kind!r}; supported: {BASELINE_KINDS}")
    if len(np.unique(y)) < 2:
        raise SingleClassTrainingSet(f"{kind} needs at least two classes")
    names = list(feature_names) if feature_names is not None else [f"f{j}" for j in range(X.shape[1])]
    if kind == "logistic-regression":
        return fit_logistic(X, y, n_classes, p.get("learning_rate", 0.1), p.get("iterations", 1000),
                            p.get("l2", 0.0), names)
    if kind == "knn":
        k = int(p.get("k", 5))
        if k < 1:
            raise ValueError("k must be >= 1")
        return KNNModel(X.copy(), y.copy(), k, n_classes, names)
    if kind == "naive-bayes":
        return fit_gaussian_nb(X, y, n_classes, p.get("var_floor", VARIANCE_FLOOR), names)
    cfg = TrainConfig(max_depth=p.get("max_depth"), min_samples_split=p.get("min_samples_split", 2),
                      bootstrap=False, seed=int(p.get("seed", 0)))
    return TreeModel(train_tree(X, y, cfg, cfg.seed, n_classes), names)
