"""CART classification tree grown on Gini impurity.

Nodes are stored as flat arrays in preorder: ``feature[i] == -1`` marks a
leaf. A sample goes left when ``x[feature] <= threshold``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

# Impurities closer than this are ties; the earlier (feature, threshold) wins.
SPLIT_TIE_TOLERANCE = 1e-12


class EmptyNode(ValueError):
    pass


def gini_impurity(counts: Sequence[float]) -> float:
    c = np.asarray(counts, dtype=float)
    total = c.sum()
    if np.any(c < 0):
        raise ValueError("negative class count")
    if total <= 0:
        raise EmptyNode("gini of an empty node")
    p = c / total
    return float(1.0 - np.dot(p, p))


@dataclass(frozen=True)
class SplitChoice:
    feature: int
    threshold: float
    impurity: float


def _feature_scan(x: np.ndarray, onehot: np.ndarray, total: np.ndarray):
    """Weighted child Gini for every valid threshold of one feature.

    Returns (impurities, thresholds) in increasing threshold order.
    """
    order = np.argsort(x, kind="stable")
    xs = x[order]
    valid = xs[:-1] < xs[1:]
    if not valid.any():
        return None
    left = np.cumsum(onehot[order], axis=0)[:-1][valid]
    right = total - left
    nl = left.sum(axis=1)
    nr = right.sum(axis=1)
    gl = 1.0 - ((left / nl[:, None]) ** 2).sum(axis=1)
    gr = 1.0 - ((right / nr[:, None]) ** 2).sum(axis=1)
    imp = (nl * gl + nr * gr) / (nl + nr)
    a, b = xs[:-1][valid], xs[1:][valid]
    thr = (a + b) / 2.0
    # adjacent floats can round the midpoint up onto b
    thr = np.where(thr < b, thr, a)
    return imp, thr


def best_split(X: np.ndarray, y: np.ndarray, candidates: Sequence[int], n_classes: int,
               sample_weight: np.ndarray | None = None) -> SplitChoice | None:
    """Lowest weighted child Gini over candidate features and midpoints between
    consecutive distinct values. None when no candidate has two distinct values.

    Candidates are scanned in the given order; ties go to the first feature
    and, within it, the smallest threshold.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    onehot = np.zeros((len(y), n_classes))
    onehot[np.arange(len(y)), y] = w
    total = onehot.sum(axis=0)
    scans = []
    for f in candidates:
        res = _feature_scan(X[:, f], onehot, total)
        if res is not None:
            scans.append((f, res[0], res[1]))
    if not scans:
        return None
    best = min(float(imp.min()) for _, imp, _ in scans)
    for f, imp, thr in scans:
        hits = np.flatnonzero(imp <= best + SPLIT_TIE_TOLERANCE)
        if hits.size:
            i = int(hits[0])
            return SplitChoice(int(f), float(thr[i]), float(imp[i]))
    return None  # unreachable


@dataclass(frozen=True)
class Leaf:
    counts: tuple[float, ...]

    @property
    def majority(self) -> int:
        return int(np.argmax(self.counts))


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "Node"
    right: "Node"


Node = Union[Leaf, Split]


class Tree:
    """Preorder node arrays plus vectorized prediction."""

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_classes(self) -> int:
        return self.value.shape[1]

    def depth(self) -> int:
        def walk(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))
        return walk(0)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of X."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict_labels(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.value[self.apply(X)], axis=1)

    def root(self) -> Node:
        def build(i):
            if self.feature[i] < 0:
                return Leaf(tuple(float(c) for c in self.value[i]))
            return Split(int(self.feature[i]), float(self.threshold[i]),
                         build(self.left[i]), build(self.right[i]))
        return build(0)

    def to_json(self) -> list:
        nodes = []
        for i in range(self.n_nodes):
            if self.feature[i] < 0:
                nodes.append(["leaf", [float(c) for c in self.value[i]]])
            else:
                nodes.append(["split", int(self.feature[i]), float(self.threshold[i]),
                              [float(c) for c in self.value[i]]])
        return nodes

    @classmethod
    def from_json(cls, nodes: list, n_classes: int) -> Tree:
        n = len(nodes)
        feature = np.full(n, -1, dtype=np.int64)
        threshold = np.zeros(n)
        left = np.full(n, -1, dtype=np.int64)
        right = np.full(n, -1, dtype=np.int64)
        value = np.zeros((n, n_classes))

        def parse(i: int) -> int:
            """Fill node i and its subtree; return the index after the subtree."""
            node = nodes[i]
            if node[0] == "leaf":
                value[i] = node[1]
                return i + 1
            if node[0] != "split":
                raise ValueError(f"bad node tag {node[0]!r}")
            feature[i], threshold[i], value[i] = node[1], node[2], node[3]
            left[i] = i + 1
            right[i] = parse(i + 1)
            return parse(int(right[i]))

        if parse(0) != n:
            raise ValueError("trailing nodes in serialized tree")
        return cls(feature, threshold, left, right, value)


def grow_tree(X: np.ndarray, y: np.ndarray, n_classes: int, rng: np.random.Generator,
              max_depth: int | None = None, min_samples_split: int = 2,
              features_per_split: int | None = None,
              sample_weight: np.ndarray | None = None) -> Tree:
    """Grow one tree until leaves are pure, ``max_depth`` is hit, a node has
    fewer than ``min_samples_split`` samples, or no split exists.

    At every node ``features_per_split`` features are drawn at random and
    scanned in index order; if none of them can split, the remaining
    features are tried one at a time in the drawn order.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    if n == 0:
        raise EmptyNode("cannot grow a tree on zero samples")
    fps = d if features_per_split is None else int(features_per_split)
    if not 1 <= fps <= d:
        raise ValueError(f"features_per_split must be in [1, {d}]")
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float)

    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(counts):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(counts)
        return len(feature) - 1

    def grow(idx: np.ndarray, depth: int) -> int:
        counts = np.bincount(y[idx], weights=w[idx], minlength=n_classes)
        me = new_node(counts)
        if (np.count_nonzero(counts) <= 1 or (max_depth is not None and depth >= max_depth)
                or len(idx) < min_samples_split):
            return me
        perm = rng.permutation(d)
        Xi, yi, wi = X[idx], y[idx], w[idx]
        choice = best_split(Xi, yi, sorted(int(f) for f in perm[:fps]), n_classes, wi)
        for f in perm[fps:]:
            if choice is not None:
                break
            choice = best_split(Xi, yi, [int(f)], n_classes, wi)
        if choice is None:
            return me
        mask = Xi[:, choice.feature] <= choice.threshold
        feature[me] = choice.feature
        threshold[me] = choice.threshold
        left[me] = grow(idx[mask], depth + 1)
        right[me] = grow(idx[~mask], depth + 1)
        return me

    grow(np.arange(n), 0)
    return Tree(feature, threshold, left, right, np.array(value).reshape(len(value), n_classes))
