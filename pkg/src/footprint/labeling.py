"""Seed labels: coded-labels files, description rules and hashtag footprints."""

from __future__ import annotations

import csv
import enum
import os
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Iterator, Mapping

from footprint.categories import CATEGORIES, Category, UnknownCategoryToken
from footprint.corpus import TweetRecord, normalize_hashtag

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

DEFAULT_MIN_HITS = 2


class LabelingError(Exception):
    pass


class DuplicateAccountConflict(LabelingError):
    pass


class Provenance(str, enum.Enum):
    CODED_FILE = "coded-file"
    DESCRIPTION_RULE = "description-rule"
    HASHTAG_FOOTPRINT = "hashtag-footprint"
    PROPAGATED = "propagated"


# lower number wins
_PRIORITY = {
    Provenance.CODED_FILE: 0,
    Provenance.DESCRIPTION_RULE: 1,
    Provenance.HASHTAG_FOOTPRINT: 2,
    Provenance.PROPAGATED: 3,
}


@dataclass
class SeedLabelSet:
    labels: dict[str, tuple[Category, Provenance]] = field(default_factory=dict)
    rejected: list[tuple[int, str]] = field(default_factory=list)

    def add(self, account_id: str, category: Category, provenance: Provenance) -> None:
        """Insert a label; a higher-priority source overrides, an equal one must agree."""
        if category is Category.UNCATEGORIZED:
            raise ValueError("Uncategorized is not a label")
        old = self.labels.get(account_id)
        if old is None:
            self.labels[account_id] = (category, provenance)
            return
        old_cat, old_prov = old
        if _PRIORITY[provenance] < _PRIORITY[old_prov]:
            self.labels[account_id] = (category, provenance)
        elif _PRIORITY[provenance] == _PRIORITY[old_prov] and old_cat is not category:
            raise DuplicateAccountConflict(
                f"{account_id}: {old_cat} vs {category} from equal-priority source {provenance.value}")

    def category(self, account_id: str) -> Category:
        hit = self.labels.get(account_id)
        return hit[0] if hit else Category.UNCATEGORIZED

    def categories(self) -> dict[str, Category]:
        return {a: c for a, (c, _) in self.labels.items()}

    def census(self) -> dict[str, int]:
        counts = Counter(c for c, _ in self.labels.values())
        return {c.value: counts.get(c, 0) for c in CATEGORIES}

    def by_provenance(self) -> dict[str, int]:
        counts = Counter(p for _, p in self.labels.values())
        return {p.value: counts.get(p, 0) for p in Provenance}

    def copy(self) -> SeedLabelSet:
        return SeedLabelSet(dict(self.labels), list(self.rejected))

    def __contains__(self, account_id: object) -> bool:
        return account_id in self.labels

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[str]:
        return iter(self.labels)

    def write_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["account_id", "category", "provenance"])
            for aid in sorted(self.labels):
                cat, prov = self.labels[aid]
                w.writerow([aid, cat.value, prov.value])

    @classmethod
    def read_csv(cls, path: str | os.PathLike) -> SeedLabelSet:
        out = cls()
        with open(path, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                out.labels[row["account_id"]] = (Category.parse(row["category"]),
                                                 Provenance(row["provenance"]))
        return out


def load_seed_labels(path: str | os.PathLike, strict: bool = True) -> SeedLabelSet:
    """Read a coded-labels CSV with columns ``account_id, category``.

    Exact duplicate rows are harmless. The same account with two different
    categories raises ``DuplicateAccountConflict``. Unknown category tokens
    (including ``Uncategorized``) raise ``UnknownCategoryToken`` when
    ``strict``; otherwise the row is skipped and listed in ``rejected``.
    """
    out = SeedLabelSet()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        cols = set(reader.fieldnames or [])
        if not {"account_id", "category"} <= cols:
            raise LabelingError(f"{path}: expected columns account_id, category; got {sorted(cols)}")
        for lineno, row in enumerate(reader, start=2):
            aid = (row.get("account_id") or "").strip()
            token = (row.get("category") or "").strip()
            if not aid:
                out.rejected.append((lineno, "missing account_id"))
                continue
            try:
                cat = Category.parse(token)
                if cat is Category.UNCATEGORIZED:
                    raise UnknownCategoryToken("Uncategorized is not a training label")
            except UnknownCategoryToken as exc:
                if strict:
                    raise UnknownCategoryToken(f"line {lineno}: {exc}") from None
                out.rejected.append((lineno, str(exc)))
                continue
            out.add(aid, cat, Provenance.CODED_FILE)
    return out


# -- description rules -------------------------------------------------------

@dataclass(frozen=True)
class Rule:
    pattern: str
    category: Category
    regex: re.Pattern[str]

    @classmethod
    def make(cls, pattern: str, category: Category | str) -> Rule:
        cat = category if isinstance(category, Category) else Category.parse(category)
        if pattern.startswith("re:"):
            rx = re.compile(pattern[3:], re.IGNORECASE)
        else:
            rx = re.compile(re.escape(pattern), re.IGNORECASE)
        return cls(pattern, cat, rx)


def load_rules(path: str | os.PathLike | None = None) -> list[Rule]:
    """Ordered rules from a flat ``"pattern" = "Category"`` TOML file (default: bundled)."""
    if path is None:
        text = resources.files("footprint.data").joinpath("default_rules.toml").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    table = tomllib.loads(text)
    return [Rule.make(k, v) for k, v in table.items()]


def label_from_description(description: str | None, rules: Iterable[Rule]) -> Category | None:
    if not description or not description.strip():
        return None
    for rule in rules:
        if rule.regex.search(description):
            return rule.category
    return None


# -- hashtag footprints -------------------------------------------------------

def load_footprint_table(path: str | os.PathLike | None = None) -> dict[str, Category]:
    """Read ``hashtag, category`` rows; a hashtag may only map to one category."""
    if path is None:
        text = resources.files("footprint.data").joinpath("default_footprints.csv").read_text("utf-8")
        rows = list(csv.DictReader(text.splitlines()))
    else:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
    table: dict[str, Category] = {}
    for row in rows:
        tag = normalize_hashtag(row["hashtag"])
        cat = Category.parse(row["category"])
        if not tag:
            continue
        if tag in table and table[tag] is not cat:
            raise LabelingError(f"hashtag #{tag} maps to both {table[tag]} and {cat}")
        table[tag] = cat
    return table


def footprint_hits(tweets: Iterable[TweetRecord | Iterable[str]],
                   table: Mapping[str, Category]) -> Counter[Category]:
    hits: Counter[Category] = Counter()
    for t in tweets:
        tags = t.hashtags if isinstance(t, TweetRecord) else t
        for tag in tags:
            cat = table.get(tag)
            if cat is not None:
                hits[cat] += 1
    return hits


def resolve_footprint(hits: Mapping[Category, int], min_hits: int = DEFAULT_MIN_HITS) -> Category | None:
    if min_hits < 1:
        raise ValueError("min_hits must be >= 1")
    if not hits:
        return None
    best = max(hits.values())
    if best < min_hits:
        return None
    return next(c for c in CATEGORIES if hits.get(c, 0) == best)


def label_from_hashtag_footprint(tweets: Iterable[TweetRecord | Iterable[str]],
                                 table: Mapping[str, Category],
                                 min_hits: int = DEFAULT_MIN_HITS) -> Category | None:
    """Category whose footprint hashtags the account used most, if used >= min_hits times.

    Ties go to the earlier category in the fixed order.
    """
    if min_hits < 1:
        raise ValueError("min_hits must be >= 1")
    return resolve_footprint(footprint_hits(tweets, table), min_hits)


def seed_labels(dataset, coded: SeedLabelSet | None = None, rules: list[Rule] | None = None,
                footprints: Mapping[str, Category] | None = None,
                min_hits: int = DEFAULT_MIN_HITS) -> SeedLabelSet:
    """Combine the three seed sources for one dataset.

    Coded labels win, description rules apply only to unhashed accounts, and
    footprint labels only to hashed accounts (one pass over the tweet store).
    """
    out = SeedLabelSet()
    if coded is not None:
        for aid, (cat, prov) in coded.labels.items():
            if aid in dataset.accounts:
                out.add(aid, cat, prov)
        out.rejected.extend(coded.rejected)
    if rules:
        for aid in sorted(dataset.accounts):
            prof = dataset.accounts[aid]
            if prof.is_hashed or aid in out:
                continue
            cat = label_from_description(prof.description, rules)
            if cat is not None:
                out.add(aid, cat, Provenance.DESCRIPTION_RULE)
    if footprints:
        hashed = {a for a, p in dataset.accounts.items() if p.is_hashed and a not in out}
        hits: dict[str, Counter[Category]] = {}
        for rec in dataset.tweets():
            if rec.account_id in hashed:
                for tag in rec.hashtags:
                    cat = footprints.get(tag)
                    if cat is not None:
                        hits.setdefault(rec.account_id, Counter())[cat] += 1
        for aid in sorted(hits):
            cat = resolve_footprint(hits[aid], min_hits)
            if cat is not None:
                out.add(aid, cat, Provenance.HASHTAG_FOOTPRINT)
    return out
