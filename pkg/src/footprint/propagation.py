"""Hashtag-similarity propagation of categories to hashed accounts.

The timeframe is cut into fixed-width month windows. Inside each window,
every account that used hashtags becomes a sparse count vector over that
window's hashtag vocabulary. An unlabeled account takes the category of the
labeled account it is most cosine-similar to (its per-window, provisional
category); the final category is the most frequent provisional one.
"""

from __future__ import annotations

import bisect
import calendar
import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

from footprint.categories import CATEGORIES, Category
from footprint.labeling import Provenance, SeedLabelSet

log = logging.getLogger(__name__)

LOW_CONFIDENCE_FLOOR = 0.05
# Scores closer than this are treated as tied.
TIE_TOLERANCE = 1e-12
MAX_FIXPOINT_ROUNDS = 10
_ROW_CHUNK = 512


class PropagationError(Exception):
    pass


class EmptyDataset(PropagationError):
    pass


class NoCategorizedActivity(PropagationError):
    pass


class ZeroVector(PropagationError, ValueError):
    pass


class NoEntries(PropagationError):
    pass


@dataclass(frozen=True)
class Subspan:
    index: int
    start: datetime
    end: datetime


def add_months(dt: datetime, months: int) -> datetime:
    """Calendar month arithmetic, clamping the day to the target month's length."""
    total = dt.month - 1 + months
    year, month = dt.year + total // 12, total % 12 + 1
    day = min(dt.day, calendar.monthrange(year, month)[1])
    return dt.replace(year=year, month=month, day=day)


def partition_subspans(dataset_or_timeframe, width: int = 6) -> list[Subspan]:
    """Contiguous windows of ``width`` months from the first to the last tweet.

    Windows are half-open except the last, which also holds its end instant;
    the last window may be shorter than ``width``.
    """
    if width < 1:
        raise ValueError("width must be >= 1 month")
    frame = getattr(dataset_or_timeframe, "timeframe", dataset_or_timeframe)
    if getattr(dataset_or_timeframe, "n_tweets", 1) == 0 or not frame:
        raise EmptyDataset("dataset has no tweets")
    start, end = frame
    out = []
    i = 0
    while True:
        s = add_months(start, i * width)
        if i > 0 and s >= end:
            break
        e = min(add_months(start, (i + 1) * width), end)
        out.append(Subspan(i, s, e))
        i += 1
        if e >= end:
            break
    return out


def subspan_index(ts: datetime, subspans: Sequence[Subspan]) -> int | None:
    if not subspans or ts < subspans[0].start or ts > subspans[-1].end:
        return None
    starts = [s.start for s in subspans]
    return bisect.bisect_right(starts, ts) - 1


@dataclass(frozen=True)
class SubspanVocabulary:
    subspan: int
    index: dict[str, int]

    @property
    def m(self) -> int:
        return len(self.index)

    @classmethod
    def build(cls, subspan: int, hashtags: Iterable[str]) -> SubspanVocabulary:
        return cls(subspan, {h: i for i, h in enumerate(sorted(set(hashtags)))})


@dataclass(frozen=True)
class SparseHashtagVector:
    account_id: str
    subspan: int
    dims: tuple[int, ...]
    counts: tuple[int, ...]
    norm: float

    @classmethod
    def from_counts(cls, account_id: str, subspan: int, counts: Mapping[str, int],
                    vocab: SubspanVocabulary, binary: bool = False) -> SparseHashtagVector:
        pairs = sorted((vocab.index[h], 1 if binary else int(c)) for h, c in counts.items() if c > 0)
        dims = tuple(d for d, _ in pairs)
        vals = tuple(c for _, c in pairs)
        return cls(account_id, subspan, dims, vals, math.sqrt(sum(c * c for c in vals)))

    @classmethod
    def from_dense(cls, values: Sequence[float], account_id: str = "", subspan: int = 0):
        pairs = [(i, v) for i, v in enumerate(values) if v]
        dims = tuple(i for i, _ in pairs)
        vals = tuple(v for _, v in pairs)
        return cls(account_id, subspan, dims, vals, math.sqrt(sum(v * v for v in vals)))


def cosine_similarity(u: SparseHashtagVector, v: SparseHashtagVector) -> float:
    """u.v / (|u| |v|), computed by a merge walk in dimension order."""
    if u.norm == 0 or v.norm == 0:
        raise ZeroVector("cosine similarity of a zero vector")
    dot = 0
    i = j = 0
    while i < len(u.dims) and j < len(v.dims):
        du, dv = u.dims[i], v.dims[j]
        if du == dv:
            dot += u.counts[i] * v.counts[j]
            i += 1
            j += 1
        elif du < dv:
            i += 1
        else:
            j += 1
    return min(1.0, max(0.0, dot / (u.norm * v.norm)))


@dataclass
class SimilarityMatrices:
    subspan: int
    vocabulary: SubspanVocabulary
    U: list[SparseHashtagVector]
    V: list[SparseHashtagVector]

    @property
    def m(self) -> int:
        return self.vocabulary.m

    @property
    def n_uncategorized(self) -> int:
        return len(self.U)

    @property
    def k(self) -> int:
        return len(self.V)


def subspan_hashtag_counts(dataset, subspans: Sequence[Subspan]) -> list[dict[str, Counter]]:
    """One pass over the tweet store: per subspan, per account hashtag counts."""
    out: list[dict[str, Counter]] = [dict() for _ in subspans]
    starts = [s.start for s in subspans]
    lo, hi = subspans[0].start, subspans[-1].end
    for rec in dataset.tweets():
        if not rec.hashtags or rec.timestamp < lo or rec.timestamp > hi:
            continue
        idx = bisect.bisect_right(starts, rec.timestamp) - 1
        bucket = out[idx].get(rec.account_id)
        if bucket is None:
            bucket = out[idx][rec.account_id] = Counter()
        bucket.update(rec.hashtags)
    return out


def matrices_from_counts(subspan: int, counts: Mapping[str, Counter], labels: Mapping[str, Category],
                         targets: Iterable[str] | None = None, binary: bool = False) -> SimilarityMatrices:
    """U from target (unlabeled) accounts, V from labeled accounts, shared vocabulary.

    ``targets`` defaults to every account without a label.
    """
    target_set = None if targets is None else set(targets)
    u_ids, v_ids = [], []
    for aid in sorted(counts):
        if aid in labels:
            v_ids.append(aid)
        elif target_set is None or aid in target_set:
            u_ids.append(aid)
    vocab = SubspanVocabulary.build(subspan, (h for a in u_ids + v_ids for h in counts[a]))
    U = [SparseHashtagVector.from_counts(a, subspan, counts[a], vocab, binary) for a in u_ids]
    V = [SparseHashtagVector.from_counts(a, subspan, counts[a], vocab, binary) for a in v_ids]
    if not V:
        raise NoCategorizedActivity(f"subspan {subspan}: no labeled account used hashtags")
    return SimilarityMatrices(subspan, vocab, U, V)


def build_vectors(dataset, subspan: Subspan, labeled: SeedLabelSet | Mapping[str, Category],
                  targets: Iterable[str] | None = None, binary: bool = False) -> SimilarityMatrices:
    counts = subspan_hashtag_counts(dataset, [subspan])[0]
    labels = labeled.categories() if isinstance(labeled, SeedLabelSet) else labeled
    return matrices_from_counts(subspan.index, counts, labels, targets, binary)


@dataclass(frozen=True)
class Entry:
    category: Category
    score: float
    low_confidence: bool = False


@dataclass
class ImpermanentAssignment:
    account_id: str
    entries: dict[int, Entry] = field(default_factory=dict)


def _csr(vectors: Sequence[SparseHashtagVector], m: int) -> sparse.csr_matrix:
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, v in enumerate(vectors):
        indptr[i + 1] = indptr[i] + len(v.dims)
    indices = np.fromiter((d for v in vectors for d in v.dims), dtype=np.int64, count=int(indptr[-1]))
    data = np.fromiter((c for v in vectors for c in v.counts), dtype=np.int64, count=int(indptr[-1]))
    return sparse.csr_matrix((data, indices, indptr), shape=(len(vectors), m))


def assign_impermanent(matrices: SimilarityMatrices, labels: Mapping[str, Category],
                       low_confidence: float = LOW_CONFIDENCE_FLOOR) -> dict[str, Entry]:
    """Give every U column the category of its most similar V column.

    Dot products are exact integer sums; a score is ``dot / (|u| |v|)``.
    Ties (within ``TIE_TOLERANCE``) go to the earliest category in the fixed
    order, so V's column order never matters. Scores below ``low_confidence``
    are kept but flagged.
    """
    if matrices.k == 0:
        raise NoCategorizedActivity(f"subspan {matrices.subspan}: k = 0")
    if not matrices.U:
        return {}
    m = max(matrices.m, 1)
    V = _csr(matrices.V, m).T.tocsc()
    v_norm = np.array([v.norm for v in matrices.V])
    v_cat = np.array([labels[v.account_id].index for v in matrices.V])
    groups = [np.flatnonzero(v_cat == c) for c in range(len(CATEGORIES))]
    out: dict[str, Entry] = {}
    for lo in range(0, len(matrices.U), _ROW_CHUNK):
        chunk = matrices.U[lo:lo + _ROW_CHUNK]
        dots = (_csr(chunk, m) @ V).toarray()
        u_norm = np.array([u.norm for u in chunk])
        scores = dots / (u_norm[:, None] * v_norm[None, :])
        per_cat = np.full((len(chunk), len(CATEGORIES)), -np.inf)
        for c, cols in enumerate(groups):
            if cols.size:
                per_cat[:, c] = scores[:, cols].max(axis=1)
        best = per_cat.max(axis=1)
        for r, u in enumerate(chunk):
            c = int(np.flatnonzero(per_cat[r] >= best[r] - TIE_TOLERANCE)[0])
            s = float(min(1.0, max(0.0, best[r])))
            out[u.account_id] = Entry(CATEGORIES[c], s, s < low_confidence)
    return out


def resolve_final(assignment: ImpermanentAssignment | Mapping[int, Entry]) -> tuple[Category, float]:
    """Most frequent provisional category and its relative frequency.

    A tie on frequency goes to the larger summed score, then to the fixed
    category order.
    """
    entries = assignment.entries if isinstance(assignment, ImpermanentAssignment) else assignment
    if not entries:
        raise NoEntries("account has no provisional categories")
    freq: Counter[Category] = Counter()
    scores: dict[Category, list[float]] = {}
    for e in entries.values():
        freq[e.category] += 1
        scores.setdefault(e.category, []).append(e.score)
    sums = {c: math.fsum(s) for c, s in scores.items()}
    top = max(freq.values())
    tied = [c for c in CATEGORIES if freq.get(c, 0) == top]
    best_sum = max(sums[c] for c in tied)
    winner = next(c for c in tied if sums[c] >= best_sum - TIE_TOLERANCE)
    return winner, top / len(entries)


@dataclass
class PropagationResult:
    labels: SeedLabelSet
    assignments: dict[str, ImpermanentAssignment]
    final: dict[str, tuple[Category, float]]
    subspans: list[Subspan]
    skipped_subspans: list[int]
    targets: list[str]
    rounds: int
    params: dict = field(default_factory=dict)

    @property
    def propagated(self) -> int:
        return len(self.final)

    @property
    def still_uncategorized(self) -> list[str]:
        return [a for a in self.targets if a not in self.final]

    def report(self) -> dict:
        accounts = {}
        for aid in self.targets:
            a = self.assignments.get(aid)
            cat, conf = self.final.get(aid, (Category.UNCATEGORIZED, 0.0))
            accounts[aid] = {
                "category": cat.value,
                "confidence": conf,
                "trail": {str(i): {"category": e.category.value, "score": e.score,
                                   "low_confidence": e.low_confidence}
                          for i, e in sorted(a.entries.items())} if a else {},
            }
        census = Counter(c.value for c, _ in self.final.values())
        return {
            "params": self.params,
            "rounds": self.rounds,
            "subspans": [{"index": s.index, "start": s.start.isoformat(), "end": s.end.isoformat()}
                         for s in self.subspans],
            "skipped_subspans": self.skipped_subspans,
            "targets": len(self.targets),
            "propagated": self.propagated,
            "uncategorized": len(self.targets) - self.propagated,
            "census": {c.value: census.get(c.value, 0) for c in CATEGORIES},
            "accounts": accounts,
        }


def propagate(dataset, labels: SeedLabelSet, width: int = 6, mode: str = "single",
              binary: bool = False, threads: int = 1, include_unhashed: bool = False,
              low_confidence: float = LOW_CONFIDENCE_FLOOR) -> PropagationResult:
    """Run the whole propagation stage over ``dataset``.

    ``mode="single"`` uses only the seed labels as the labeled side;
    ``mode="fixpoint"`` feeds resolved accounts back in and repeats, at most
    ``MAX_FIXPOINT_ROUNDS`` times, until nothing new resolves.
    """
    if mode not in ("single", "fixpoint"):
        raise ValueError(f"unknown propagation mode {mode!r}")
    subspans = partition_subspans(dataset, width)
    counts = subspan_hashtag_counts(dataset, subspans)
    targets = sorted(a for a, p in dataset.accounts.items()
                     if a not in labels and (p.is_hashed or include_unhashed))
    out_labels = labels.copy()
    assignments: dict[str, ImpermanentAssignment] = {}
    final: dict[str, tuple[Category, float]] = {}
    pending = set(targets)
    skipped: set[int] = set()
    rounds = 0
    max_rounds = 1 if mode == "single" else MAX_FIXPOINT_ROUNDS
    while pending and rounds < max_rounds:
        rounds += 1
        known = out_labels.categories()
        round_targets = set(pending)
        skipped_now: list[int] = []

        def work(sp: Subspan):
            try:
                mats = matrices_from_counts(sp.index, counts[sp.index], known, round_targets, binary)
            except NoCategorizedActivity:
                return sp.index, None
            return sp.index, assign_impermanent(mats, known, low_confidence)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(work, subspans))
        else:
            results = [work(sp) for sp in subspans]

        round_assign: dict[str, ImpermanentAssignment] = {}
        for idx, entries in results:
            if entries is None:
                skipped_now.append(idx)
                log.info("subspan %d skipped: no labeled hashtag activity", idx)
                continue
            for aid, e in entries.items():
                round_assign.setdefault(aid, ImpermanentAssignment(aid)).entries[idx] = e
        skipped = set(skipped_now)
        newly = 0
        for aid in sorted(round_assign):
            cat, conf = resolve_final(round_assign[aid])
            assignments[aid] = round_assign[aid]
            final[aid] = (cat, conf)
            out_labels.add(aid, cat, Provenance.PROPAGATED)
            pending.discard(aid)
            newly += 1
        if newly == 0:
            break

    params = {"subspan_months": width, "vector_mode": "binary" if binary else "counts",
              "propagation": mode, "include_unhashed": include_unhashed,
              "low_confidence_floor": low_confidence}
    return PropagationResult(out_labels, assignments, final, subspans, sorted(skipped),
                             targets, rounds, params)
