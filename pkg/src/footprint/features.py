"""Behavioral feature vectors: extraction, Pearson screening, L1 normalization."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from footprint.categories import Category
from footprint.corpus import AggregateRecord, UnknownAccount, account_aggregates

DEFAULT_TARGET_COUNT = 8


class TooFewSamples(ValueError):
    pass


Extractor = Callable[[AggregateRecord], float]

EXTRACTORS: dict[str, Extractor] = {
    "tweet_count": lambda a: float(a.tweet_count),
    "retweet_count": lambda a: float(a.retweet_count),
    "mention_count": lambda a: float(a.mention_count),
    "avg_followers": lambda a: a.mean_followers,
    "avg_following": lambda a: a.mean_following,
    "hashtag_count": lambda a: float(a.hashtag_count),
    "reply_count": lambda a: float(a.reply_count),
    "like_count": lambda a: float(a.like_count),
    # optional timing features
    "tweets_per_active_day": lambda a: a.tweet_count / a.active_days if a.active_days else 0.0,
    "active_days": lambda a: float(a.active_days),
}

DEFAULT_FEATURES = ("tweet_count", "retweet_count", "mention_count", "avg_followers",
                    "avg_following", "hashtag_count", "reply_count", "like_count")
TIMING_FEATURES = ("tweets_per_active_day", "active_days")


@dataclass(frozen=True)
class FeatureCatalog:
    names: tuple[str, ...] = DEFAULT_FEATURES

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate feature names in {self.names}")
        unknown = [n for n in self.names if n not in EXTRACTORS]
        if unknown:
            raise ValueError(f"no extractor for {unknown}")

    @classmethod
    def default(cls, timing: bool = False) -> FeatureCatalog:
        return cls(DEFAULT_FEATURES + (TIMING_FEATURES if timing else ()))

    def subset(self, keep: Sequence[str]) -> FeatureCatalog:
        keep_set = set(keep)
        return FeatureCatalog(tuple(n for n in self.names if n in keep_set))

    def __len__(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class FeatureVector:
    account_id: str
    values: tuple[float, ...]
    feature_names: tuple[str, ...]
    degenerate: bool = False

    def __len__(self) -> int:
        return len(self.values)


def extract_features(dataset, account_id: str, catalog: FeatureCatalog = FeatureCatalog()) -> FeatureVector:
    agg = account_aggregates(dataset, account_id)
    values = tuple(EXTRACTORS[n](agg) for n in catalog.names)
    return FeatureVector(account_id, values, catalog.names, degenerate=not any(values))


def l1_normalize(vector: FeatureVector) -> FeatureVector:
    """Divide each value by the row's sum of absolute values.

    An all-zero row is returned unchanged with ``degenerate=True``.
    """
    total = math.fsum(abs(v) for v in vector.values)
    if total == 0:
        return FeatureVector(vector.account_id, vector.values, vector.feature_names, True)
    return FeatureVector(vector.account_id, tuple(v / total for v in vector.values),
                         vector.feature_names, False)


def l1_normalize_rows(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    s = np.abs(X).sum(axis=1, keepdims=True)
    return np.divide(X, s, out=X.copy(), where=s != 0)


def l1_normalize_columns(X: np.ndarray) -> np.ndarray:
    """Column variant (each feature scaled to unit L1 mass across samples)."""
    X = np.asarray(X, dtype=float)
    s = np.abs(X).sum(axis=0, keepdims=True)
    return np.divide(X, s, out=X.copy(), where=s != 0)


@dataclass
class CorrelationReport:
    feature_names: list[str]
    matrix: np.ndarray
    constant: list[str] = field(default_factory=list)
    dropped: list[dict] = field(default_factory=list)

    def mean_abs(self) -> dict[str, float]:
        d = len(self.feature_names)
        if d < 2:
            return {n: 0.0 for n in self.feature_names}
        out = {}
        for i, n in enumerate(self.feature_names):
            out[n] = math.fsum(abs(self.matrix[i, j]) for j in range(d) if j != i) / (d - 1)
        return out

    def r(self, a: str, b: str) -> float:
        return float(self.matrix[self.feature_names.index(a), self.feature_names.index(b)])

    def to_json(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "matrix": [[float(x) for x in row] for row in self.matrix],
            "mean_abs_r": self.mean_abs(),
            "constant": list(self.constant),
            "dropped": list(self.dropped),
        }


def pearson_matrix(vectors: Sequence[FeatureVector] | np.ndarray,
                   feature_names: Sequence[str] | None = None) -> CorrelationReport:
    """Sample Pearson r for every feature pair.

    Constant features get r = 0 against every other feature and are listed
    in ``constant``; the diagonal is always 1.
    """
    if isinstance(vectors, np.ndarray):
        X = np.asarray(vectors, dtype=float)
        names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(X.shape[1])]
    else:
        if not vectors:
            raise TooFewSamples("no samples")
        X = np.array([v.values for v in vectors], dtype=float)
        names = list(vectors[0].feature_names)
    n, d = X.shape
    if n < 3:
        raise TooFewSamples(f"need >= 3 samples, got {n}")
    centered = X - X.mean(axis=0)
    ss = np.sqrt((centered ** 2).sum(axis=0))
    constant = [names[j] for j in range(d) if ss[j] == 0]
    R = np.eye(d)
    for i in range(d):
        for j in range(i + 1, d):
            if ss[i] == 0 or ss[j] == 0:
                r = 0.0
            else:
                r = float(np.dot(centered[:, i], centered[:, j]) / (ss[i] * ss[j]))
                r = max(-1.0, min(1.0, r))
            R[i, j] = R[j, i] = r
    return CorrelationReport(names, R, constant)


def select_features(report: CorrelationReport, target_count: int = DEFAULT_TARGET_COUNT) -> list[str]:
    """Greedy multicollinearity screen down to ``target_count`` features.

    Constant features go first. Then, repeatedly, the survivor with the
    highest mean |r| to the other survivors is dropped (ties: the name that
    sorts last). Every drop is appended to ``report.dropped``. The returned
    names keep the report's order.
    """
    names = report.feature_names
    if target_count > len(names):
        raise ValueError(f"target_count {target_count} > {len(names)} candidates")
    idx = {n: i for i, n in enumerate(names)}
    survivors = sorted(names)
    report.dropped = []
    for n in sorted(report.constant, reverse=True):
        if len(survivors) <= target_count:
            break
        survivors.remove(n)
        report.dropped.append({"feature": n, "reason": "constant"})
    while len(survivors) > target_count:
        worst, worst_score = None, -1.0
        for n in survivors:
            others = [abs(report.matrix[idx[n], idx[o]]) for o in survivors if o != n]
            score = math.fsum(others) / len(others)
            if score >= worst_score:
                worst, worst_score = n, score
        survivors.remove(worst)
        report.dropped.append({"feature": worst, "reason": "max mean |r|", "mean_abs_r": worst_score})
    keep = set(survivors)
    return [n for n in names if n in keep]


@dataclass
class FeatureMatrix:
    account_ids: list[str]
    feature_names: list[str]
    X: np.ndarray
    labels: dict[str, Category] = field(default_factory=dict)

    def degenerate_mask(self) -> np.ndarray:
        return ~np.any(self.X != 0, axis=1)

    def rows(self, ids: Sequence[str]) -> np.ndarray:
        pos = {a: i for i, a in enumerate(self.account_ids)}
        return self.X[[pos[a] for a in ids]]

    def columns(self, keep: Sequence[str]) -> FeatureMatrix:
        cols = [self.feature_names.index(n) for n in keep]
        return FeatureMatrix(list(self.account_ids), list(keep), self.X[:, cols].copy(), dict(self.labels))

    def normalized(self, axis: str = "row") -> FeatureMatrix:
        if axis == "row":
            Xn = l1_normalize_rows(self.X)
        elif axis == "column":
            Xn = l1_normalize_columns(self.X)
        else:
            raise ValueError(f"normalize axis must be 'row' or 'column', got {axis!r}")
        return FeatureMatrix(list(self.account_ids), list(self.feature_names), Xn, dict(self.labels))

    def to_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["account_id", *self.feature_names, "category"])
            for aid, row in zip(self.account_ids, self.X):
                cat = self.labels.get(aid)
                w.writerow([aid, *(repr(float(v)) for v in row), cat.value if cat else ""])

    @classmethod
    def from_csv(cls, path: str | os.PathLike) -> FeatureMatrix:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            names = header[1:-1]
            ids, rows, labels = [], [], {}
            for rec in reader:
                ids.append(rec[0])
                rows.append([float(v) for v in rec[1:-1]])
                if rec[-1]:
                    labels[rec[0]] = Category.parse(rec[-1])
        X = np.array(rows, dtype=float).reshape(len(rows), len(names))
        return cls(ids, names, X, labels)


def feature_matrix(dataset, catalog: FeatureCatalog = FeatureCatalog(),
                   labels: Mapping[str, Category] | None = None,
                   account_ids: Sequence[str] | None = None) -> FeatureMatrix:
    ids = sorted(dataset.accounts) if account_ids is None else list(account_ids)
    for a in ids:
        if a not in dataset.accounts:
            raise UnknownAccount(a)
    X = np.array([extract_features(dataset, a, catalog).values for a in ids], dtype=float)
    X = X.reshape(len(ids), len(catalog))
    lab = {a: c for a, c in (labels or {}).items() if c is not Category.UNCATEGORIZED}
    return FeatureMatrix(ids, list(catalog.names), X, lab)
