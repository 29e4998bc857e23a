"""Stratified folds, confusion-matrix metrics, depth sweeps and cross-dataset checks."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from footprint.categories import CATEGORIES, Category
from footprint.classifiers import Classifier, TrainConfig, grow_tree, train_forest, tree_rng

K_DEFAULT = 5
HOLDOUT_FRACTION = 0.3


class EvaluationError(Exception):
    pass


class CategoryTooSmall(EvaluationError):
    pass


class AccountSetMismatch(EvaluationError):
    pass


class EmptyIntersection(EvaluationError):
    pass


class NoOverlap(EvaluationError):
    pass


def _cat(value) -> Category:
    c = getattr(value, "category", value)
    return c if isinstance(c, Category) else Category.parse(c)


# -- folds -----------------------------------------------------------------

@dataclass
class FoldAssignment:
    k: int
    folds: dict[str, int]

    def members(self, fold: int) -> list[str]:
        return sorted(a for a, f in self.folds.items() if f == fold)

    def counts(self, labels: Mapping[str, Category]) -> dict[Category, list[int]]:
        out = {c: [0] * self.k for c in CATEGORIES}
        for a, f in self.folds.items():
            out[_cat(labels[a])][f] += 1
        return out


def stratified_folds(labels: Mapping[str, Category], k: int = K_DEFAULT, seed: int = 0) -> FoldAssignment:
    """Seeded shuffle within each category, dealt round-robin over the folds.

    The deal continues across categories where the previous one stopped,
    which keeps fold totals balanced as well.
    """
    if k < 2:
        raise ValueError("k must be >= 2 (k = 1 leaves nothing held out)")
    by_cat: dict[Category, list[str]] = {c: [] for c in CATEGORIES}
    for a, c in labels.items():
        c = _cat(c)
        if c is Category.UNCATEGORIZED:
            raise ValueError(f"{a}: Uncategorized is not an evaluation label")
        by_cat[c].append(a)
    for c, ids in by_cat.items():
        if 0 < len(ids) < k:
            raise CategoryTooSmall(f"{c.value} has {len(ids)} members, fewer than k={k}")
    folds: dict[str, int] = {}
    offset = 0
    for c in CATEGORIES:
        ids = sorted(by_cat[c])
        if not ids:
            continue
        perm = np.random.default_rng(np.random.SeedSequence([seed, c.index])).permutation(len(ids))
        for pos, j in enumerate(perm):
            folds[ids[j]] = (offset + pos) % k
        offset = (offset + len(ids)) % k
    return FoldAssignment(k, folds)


def holdout_split(labels: Mapping[str, Category], test_fraction: float = HOLDOUT_FRACTION,
                  seed: int = 0) -> tuple[list[str], list[str]]:
    """Stratified train/test split; ceil(test_fraction * n) test accounts,
    spread over categories by largest remainder."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    by_cat = {c: sorted(a for a, v in labels.items() if _cat(v) is c) for c in CATEGORIES}
    n = sum(len(v) for v in by_cat.values())
    n_test = math.ceil(test_fraction * n - 1e-9)
    quotas = {c: len(v) * n_test / n for c, v in by_cat.items()} if n else {}
    take = {c: int(math.floor(q)) for c, q in quotas.items()}
    rest = n_test - sum(take.values())
    for c in sorted(quotas, key=lambda c: (-(quotas[c] - take[c]), c.index))[:rest]:
        take[c] += 1
    train, test = [], []
    for c in CATEGORIES:
        ids = by_cat[c]
        perm = np.random.default_rng(np.random.SeedSequence([seed, 100 + c.index])).permutation(len(ids))
        chosen = {ids[j] for j in perm[:take.get(c, 0)]}
        for a in ids:
            (test if a in chosen else train).append(a)
    return sorted(train), sorted(test)


# -- metrics ---------------------------------------------------------------

@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # rows: true, columns: predicted

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Category, Category]]) -> ConfusionMatrix:
        m = np.zeros((len(CATEGORIES), len(CATEGORIES)), dtype=np.int64)
        for t, p in pairs:
            m[t.index, p.index] += 1
        return cls(m)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_json(self) -> dict:
        return {"labels": [c.value for c in CATEGORIES], "counts": self.counts.tolist()}


@dataclass
class MetricsReport:
    precision: dict[Category, float]
    recall: dict[Category, float]
    f1: dict[Category, float]
    support: dict[Category, int]
    accuracy: float
    macro_f1: float
    micro_precision: float
    micro_recall: float
    n: int
    zero_division: list[str] = field(default_factory=list)
    folds: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        per = {c.value: {"precision": self.precision[c], "recall": self.recall[c], "f1": self.f1[c],
                         "support": self.support[c]} for c in CATEGORIES}
        out = {"n": self.n, "accuracy": self.accuracy, "macro_f1": self.macro_f1,
               "micro_precision": self.micro_precision, "micro_recall": self.micro_recall,
               "per_category": per, "zero_division": list(self.zero_division)}
        if self.folds:
            out["folds"] = self.folds
        return out

    def to_markdown(self, title: str | None = None) -> str:
        names = {Category.FAKE_NEWS: "Fake News", Category.ORGANIZATIONS: "Organizations",
                 Category.POLITICAL_AFFILIATES: "Political Affiliates",
                 Category.DEFAULT_INDIVIDUALS: "Default Individuals"}
        lines = [f"### {title}", ""] if title else []
        lines += ["| Category | Precision | Recall | F1-score | Support |",
                  "|---|---:|---:|---:|---:|"]
        for c in CATEGORIES:
            lines.append(f"| {names[c]} | {self.precision[c]:.2f} | {self.recall[c]:.2f} | "
                         f"{self.f1[c]:.2f} | {self.support[c]} |")
        lines += ["", f"Accuracy: {self.accuracy:.4f} (n = {self.n}); macro-F1: {self.macro_f1:.4f}", ""]
        return "\n".join(lines)


def metrics_from_confusion(cm: ConfusionMatrix) -> MetricsReport:
    m = cm.counts
    total = int(m.sum())
    tp = np.diag(m)
    pred = m.sum(axis=0)
    true = m.sum(axis=1)
    precision, recall, f1, support, zero = {}, {}, {}, {}, []
    for c in CATEGORIES:
        i = c.index
        if pred[i] == 0:
            zero.append(f"precision:{c.value}")
        if true[i] == 0:
            zero.append(f"recall:{c.value}")
        p = tp[i] / pred[i] if pred[i] else 0.0
        r = tp[i] / true[i] if true[i] else 0.0
        precision[c], recall[c] = float(p), float(r)
        f1[c] = float(2 * p * r / (p + r)) if p + r > 0 else 0.0
        support[c] = int(true[i])
    acc = float(tp.sum() / total) if total else 0.0
    micro_p = float(tp.sum() / pred.sum()) if pred.sum() else 0.0
    micro_r = float(tp.sum() / true.sum()) if true.sum() else 0.0
    if not (micro_p == micro_r == acc):
        raise AssertionError(f"micro averages disagree: {micro_p}, {micro_r}, {acc}")
    macro = float(np.mean([f1[c] for c in CATEGORIES]))
    return MetricsReport(precision, recall, f1, support, acc, macro, micro_p, micro_r, total, zero)


def evaluate(truth: Mapping[str, Category], predictions: Mapping[str, object]
             ) -> tuple[ConfusionMatrix, MetricsReport]:
    if set(truth) != set(predictions):
        missing = len(set(truth) - set(predictions))
        extra = len(set(predictions) - set(truth))
        raise AccountSetMismatch(f"{missing} truth accounts without prediction, {extra} extra predictions")
    cm = ConfusionMatrix.from_pairs((_cat(truth[a]), _cat(predictions[a])) for a in sorted(truth))
    return cm, metrics_from_confusion(cm)


# -- cross-validation ------------------------------------------------------

Trainer = Callable[[np.ndarray, np.ndarray], Classifier]


def forest_trainer(config: TrainConfig, threads: int = 1, feature_names=None) -> Trainer:
    return lambda X, y: train_forest(X, y, config, feature_names, threads=threads)


@dataclass
class CVResult:
    report: MetricsReport
    confusion: ConfusionMatrix
    fold_reports: list[MetricsReport]
    fold_accuracies: list[float]
    predictions: dict[str, Category]
    folds: FoldAssignment

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def std_accuracy(self) -> float:
        return float(np.std(self.fold_accuracies))

    def to_json(self) -> dict:
        out = self.report.to_json()
        out["cv"] = {"k": self.folds.k, "mean_accuracy": self.mean_accuracy,
                     "std_accuracy": self.std_accuracy, "fold_accuracy": self.fold_accuracies}
        out["confusion"] = self.confusion.to_json()
        return out


def cross_validate(account_ids: Sequence[str], X: np.ndarray, labels: Mapping[str, Category],
                   trainer: Trainer | TrainConfig, k: int = K_DEFAULT, seed: int = 0) -> CVResult:
    """Train on k-1 folds, predict the held-out fold, for every fold.

    The pooled report covers the out-of-fold predictions of every account;
    per-fold accuracies are kept in fold order.
    """
    if isinstance(trainer, TrainConfig):
        trainer = forest_trainer(trainer)
    ids = list(account_ids)
    lab = {a: _cat(labels[a]) for a in ids}
    folds = stratified_folds(lab, k, seed)
    X = np.asarray(X, dtype=float)
    y = np.array([lab[a].index for a in ids], dtype=np.int64)
    fold_of = np.array([folds.folds[a] for a in ids])
    oof: dict[str, Category] = {}
    fold_reports, fold_acc, fold_rows = [], [], []
    for f in range(k):
        test = fold_of == f
        model = trainer(X[~test], y[~test])
        pred = model.predict_labels(X[test])
        test_ids = [a for a, t in zip(ids, test) if t]
        fold_pred = {a: CATEGORIES[int(p)] for a, p in zip(test_ids, pred)}
        oof.update(fold_pred)
        _, rep = evaluate({a: lab[a] for a in test_ids}, fold_pred)
        fold_reports.append(rep)
        fold_acc.append(rep.accuracy)
        fold_rows.append({"fold": f, "n": rep.n, "accuracy": rep.accuracy, "macro_f1": rep.macro_f1})
    cm, report = evaluate(lab, oof)
    report.folds = fold_rows
    return CVResult(report, cm, fold_reports, fold_acc, oof, folds)


def holdout_evaluate(account_ids: Sequence[str], X: np.ndarray, labels: Mapping[str, Category],
                     trainer: Trainer | TrainConfig, test_fraction: float = HOLDOUT_FRACTION,
                     seed: int = 0):
    """Fit on a stratified train split, score the held-out part.

    Returns (model, train ids, test ids, confusion, report).
    """
    if isinstance(trainer, TrainConfig):
        trainer = forest_trainer(trainer)
    ids = list(account_ids)
    pos = {a: i for i, a in enumerate(ids)}
    lab = {a: _cat(labels[a]) for a in ids}
    train, test = holdout_split(lab, test_fraction, seed)
    X = np.asarray(X, dtype=float)
    ytr = np.array([lab[a].index for a in train], dtype=np.int64)
    model = trainer(X[[pos[a] for a in train]], ytr)
    pred = model.predict_labels(X[[pos[a] for a in test]])
    cm, rep = evaluate({a: lab[a] for a in test}, {a: CATEGORIES[int(p)] for a, p in zip(test, pred)})
    return model, train, test, cm, rep


def depth_sweep(account_ids: Sequence[str], X: np.ndarray, labels: Mapping[str, Category],
                config: TrainConfig, depths: Iterable[int], test_fraction: float = HOLDOUT_FRACTION,
                features_per_split: int | None = None, bootstrap: bool = False
                ) -> list[tuple[int, float]]:
    """Holdout accuracy of one seeded tree per maximum depth, on one fixed split.

    The tree draws from ``tree_rng(config.seed, 0)``; by default it sees every
    feature at every node and no bootstrap. Depth 0 is a single leaf that
    predicts the training majority.
    """
    depths = list(depths)
    if not depths:
        raise ValueError("empty depth range")
    ids = list(account_ids)
    pos = {a: i for i, a in enumerate(ids)}
    lab = {a: _cat(labels[a]) for a in ids}
    train, test = holdout_split(lab, test_fraction, config.seed)
    X = np.asarray(X, dtype=float)
    Xtr, Xte = X[[pos[a] for a in train]], X[[pos[a] for a in test]]
    ytr = np.array([lab[a].index for a in train], dtype=np.int64)
    yte = np.array([lab[a].index for a in test], dtype=np.int64)
    d = X.shape[1]
    fps = d if features_per_split is None else features_per_split
    out = []
    for depth in depths:
        rng = tree_rng(config.seed, 0)
        idx = rng.integers(0, len(ytr), size=len(ytr)) if bootstrap else np.arange(len(ytr))
        tree = grow_tree(Xtr[idx], ytr[idx], len(CATEGORIES), rng, depth,
                         config.min_samples_split, fps)
        out.append((depth, float(np.mean(tree.predict_labels(Xte) == yte))))
    return out


def write_depth_sweep_csv(rows: Sequence[tuple[int, float]], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["depth", "accuracy"])
        for depth, acc in rows:
            w.writerow([depth, repr(acc)])


# -- validation against external codings -----------------------------------

DENOMINATOR_MODES = ("reference-category-size", "intersection-size")


@dataclass
class AgreementReport:
    reference: str
    reference_size: int
    intersection: int
    matched: int
    agreement: float
    denominator: str
    pairs: list[tuple[str, str]]

    def to_json(self) -> dict:
        return {"reference": self.reference, "reference_size": self.reference_size,
                "intersection": self.intersection, "matched": self.matched,
                "agreement": self.agreement, "denominator": self.denominator,
                "pairs": [list(p) for p in self.pairs]}


def _value(v) -> str:
    v = getattr(v, "category", v)
    return v.value if isinstance(v, Category) else str(v)


def cross_dataset_agreement(predictions: Mapping[str, object], reference: Mapping[str, object],
                            pairs: Mapping[object, object] | Sequence[tuple[object, object]],
                            denominator: str = "reference-category-size",
                            reference_name: str = "reference") -> AgreementReport:
    """Share of reference accounts (in the mapped reference categories) whose
    predicted category maps to their reference category.

    ``pairs`` relates model categories to reference categories, e.g.
    ``{Category.FAKE_NEWS: "NewsFeed"}``. The reference set is every
    reference account whose category appears in ``pairs``; the intersection
    is the part of it that also has a prediction.
    """
    if denominator not in DENOMINATOR_MODES:
        raise ValueError(f"denominator must be one of {DENOMINATOR_MODES}")
    items = list(pairs.items()) if isinstance(pairs, Mapping) else list(pairs)
    norm_pairs = sorted({(_value(a), _value(b)) for a, b in items})
    allowed = set(norm_pairs)
    ref_values = {b for _, b in norm_pairs}
    ref_ids = {a for a, v in reference.items() if _value(v) in ref_values}
    inter = sorted(ref_ids & set(predictions))
    if not inter:
        raise EmptyIntersection(f"no account of the mapped {reference_name} categories has a prediction")
    matched = sum((_value(predictions[a]), _value(reference[a])) in allowed for a in inter)
    denom = len(ref_ids) if denominator == "reference-category-size" else len(inter)
    return AgreementReport(reference_name, len(ref_ids), len(inter), matched, matched / denom,
                           denominator, norm_pairs)


@dataclass
class RecheckReport:
    covered: int
    correct: int
    accuracy: float
    per_category: dict[str, dict]

    def to_json(self) -> dict:
        return {"covered": self.covered, "correct": self.correct, "accuracy": self.accuracy,
                "per_category": self.per_category}


def manual_recheck_accuracy(predictions: Mapping[str, object], coded: Mapping[str, object]) -> RecheckReport:
    """Accuracy of predictions over the accounts that were coded afterwards."""
    covered = sorted(set(predictions) & set(coded))
    if not covered:
        raise NoOverlap("no predicted account has a post-hoc coding")
    per: dict[str, dict] = {}
    correct = 0
    for a in covered:
        truth = _cat(coded[a])
        ok = _cat(predictions[a]) is truth
        correct += ok
        row = per.setdefault(truth.value, {"n": 0, "correct": 0})
        row["n"] += 1
        row["correct"] += int(ok)
    for row in per.values():
        row["accuracy"] = row["correct"] / row["n"]
    return RecheckReport(len(covered), correct, correct / len(covered),
                         {c.value: per[c.value] for c in CATEGORIES if c.value in per})
