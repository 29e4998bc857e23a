"""Streaming ingest of tweet archives into accounts, aggregates and a tweet store.

Three input layouts are understood:

``alliance-tsv``
    The election-integrity release layout (``userid``, ``tweet_time``,
    ``tweet_text`` ...). Tab separated; comma separated files with the same
    header are accepted too.
``linvill-csv``
    The troll-tweets CSV layout (``external_author_id``, ``content``,
    ``publish_date`` ...). Columns that are not modeled (``account_category``,
    ``account_type`` ...) are kept per account in ``AccountProfile.extra``.
``jsonl``
    The canonical interchange format: one JSON object per line whose keys are
    the ``TweetRecord`` field names. Optional ``description`` and
    ``display_name`` keys carry profile fields.

Tweets are never all held in memory: accepted rows go to a ``TweetStore``
that spills to a temporary file once its buffer cap is reached, while
per-account counters are accumulated on the fly.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import re
import sys
import tempfile
import weakref
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence

log = logging.getLogger(__name__)

SCHEMAS = ("alliance-tsv", "linvill-csv", "jsonl")

# Letters, digits and underscore in any script; Python's \w is Unicode aware.
_HASHTAG_RE = re.compile(r"#(\w+)")
_MENTION_RE = re.compile(r"@(\w+)")
_NON_WORD_RE = re.compile(r"\W")
DEFAULT_HASH_PATTERN = re.compile(r"^[0-9a-fA-F]{16,}$")

csv.field_size_limit(min(sys.maxsize, 2**31 - 1))


class CorpusError(Exception):
    pass


class UnreadableFile(CorpusError):
    pass


class SchemaMismatch(CorpusError):
    pass


class UnknownAccount(CorpusError, KeyError):
    pass


class RowRejected(CorpusError):
    """Raised by the adapters for one bad row; counted, never fatal."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class TweetRecord:
    account_id: str
    timestamp: datetime
    text: str
    is_retweet: bool = False
    is_reply: bool = False
    like_count: int = 0
    hashtags: tuple[str, ...] = ()
    mentions: tuple[str, ...] = ()
    follower_count_at_tweet: int = 0
    following_count_at_tweet: int = 0
    language_tag: str = "und"

    def to_json(self) -> dict[str, Any]:
        return {
            "account_id": self.account_id,
            "timestamp": self.timestamp.isoformat(),
            "text": self.text,
            "is_retweet": self.is_retweet,
            "is_reply": self.is_reply,
            "like_count": self.like_count,
            "hashtags": list(self.hashtags),
            "mentions": list(self.mentions),
            "follower_count_at_tweet": self.follower_count_at_tweet,
            "following_count_at_tweet": self.following_count_at_tweet,
            "language_tag": self.language_tag,
        }


@dataclass(frozen=True)
class AccountProfile:
    account_id: str
    is_hashed: bool
    display_name: str | None = None
    description: str | None = None
    primary_language: str = "und"
    first_seen: datetime | None = None
    last_seen: datetime | None = None
    extra: dict[str, str] = field(default_factory=dict, compare=False)

    def to_json(self) -> dict[str, Any]:
        return {
            "account_id": self.account_id,
            "is_hashed": self.is_hashed,
            "display_name": self.display_name,
            "description": self.description,
            "primary_language": self.primary_language,
            "first_seen": self.first_seen.isoformat() if self.first_seen else None,
            "last_seen": self.last_seen.isoformat() if self.last_seen else None,
            "extra": dict(sorted(self.extra.items())),
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> AccountProfile:
        return cls(
            account_id=obj["account_id"],
            is_hashed=bool(obj["is_hashed"]),
            display_name=obj.get("display_name"),
            description=obj.get("description"),
            primary_language=obj.get("primary_language", "und"),
            first_seen=parse_timestamp(obj["first_seen"]) if obj.get("first_seen") else None,
            last_seen=parse_timestamp(obj["last_seen"]) if obj.get("last_seen") else None,
            extra=dict(obj.get("extra") or {}),
        )


@dataclass(frozen=True)
class AggregateRecord:
    tweet_count: int = 0
    retweet_count: int = 0
    mention_count: int = 0
    hashtag_count: int = 0
    reply_count: int = 0
    like_count: int = 0
    mean_followers: float = 0.0
    mean_following: float = 0.0
    active_days: int = 0


class _AccountStats:
    """Mutable integer counters; sums make ingest order-insensitive."""

    __slots__ = ("tweets", "retweets", "mentions", "hashtags", "replies", "likes",
                 "followers", "following", "days", "languages")

    def __init__(self) -> None:
        self.tweets = self.retweets = self.mentions = self.hashtags = 0
        self.replies = self.likes = self.followers = self.following = 0
        self.days: set[date] = set()
        self.languages: Counter[str] = Counter()

    def add(self, rec: TweetRecord) -> None:
        self.tweets += 1
        self.retweets += rec.is_retweet
        self.replies += rec.is_reply
        self.mentions += len(rec.mentions)
        self.hashtags += len(rec.hashtags)
        self.likes += rec.like_count
        self.followers += rec.follower_count_at_tweet
        self.following += rec.following_count_at_tweet
        self.days.add(rec.timestamp.date())
        self.languages[rec.language_tag] += 1

    def record(self) -> AggregateRecord:
        n = self.tweets
        return AggregateRecord(
            tweet_count=n,
            retweet_count=self.retweets,
            mention_count=self.mentions,
            hashtag_count=self.hashtags,
            reply_count=self.replies,
            like_count=self.likes,
            mean_followers=self.followers / n if n else 0.0,
            mean_following=self.following / n if n else 0.0,
            active_days=len(self.days),
        )


class TweetStore:
    """Append-ordered, re-iterable tweet sequence with bounded memory.

    At most ``buffer_cap`` records are held in memory; older records are
    spilled as canonical JSON lines to a temporary file. ``peak_buffered``
    records the largest in-memory buffer seen, which the streaming tests use.
    """

    def __init__(self, buffer_cap: int = 100_000, spool_dir: str | os.PathLike | None = None):
        if buffer_cap < 1:
            raise ValueError("buffer_cap must be >= 1")
        self.buffer_cap = buffer_cap
        self._spool_dir = spool_dir
        self._buffer: list[TweetRecord] = []
        self._path: str | None = None
        self._spilled = 0
        self.peak_buffered = 0

    def append(self, rec: TweetRecord) -> None:
        self._buffer.append(rec)
        self.peak_buffered = max(self.peak_buffered, len(self._buffer))
        if len(self._buffer) >= self.buffer_cap:
            self._spill()

    def _spill(self) -> None:
        if self._path is None:
            fd, self._path = tempfile.mkstemp(prefix="tweets-", suffix=".jsonl", dir=self._spool_dir)
            os.close(fd)
            weakref.finalize(self, _unlink_quietly, self._path)
        with open(self._path, "a", encoding="utf-8") as fh:
            for rec in self._buffer:
                fh.write(json.dumps(rec.to_json(), ensure_ascii=False))
                fh.write("\n")
        self._spilled += len(self._buffer)
        self._buffer = []

    @property
    def spilled(self) -> int:
        return self._spilled

    def __len__(self) -> int:
        return self._spilled + len(self._buffer)

    def __iter__(self) -> Iterator[TweetRecord]:
        if self._path is not None:
            with open(self._path, encoding="utf-8") as fh:
                for line in fh:
                    yield record_from_json(json.loads(line))
        yield from list(self._buffer)


def _unlink_quietly(path: str) -> None:
    try:
        os.unlink(path)
    except OSError:
        pass


@dataclass
class IngestSummary:
    dataset: str = ""
    schema: str = ""
    rows_read: int = 0
    rows_filtered_language: int = 0
    rows: int = 0
    rows_rejected: int = 0
    reject_reasons: dict[str, int] = field(default_factory=dict)
    accounts: int = 0
    hashed_accounts: int = 0
    defaulted_fields: dict[str, int] = field(default_factory=dict)
    retweet_heuristic_rows: int = 0
    extra_columns: list[str] = field(default_factory=list)

    @property
    def rows_accepted(self) -> int:
        return self.rows - self.rows_rejected

    def merge(self, other: IngestSummary) -> IngestSummary:
        """Combine summaries of disjoint shards (account counts must be recomputed
        by the caller when shards share accounts)."""
        return IngestSummary(
            dataset=self.dataset or other.dataset,
            schema=self.schema or other.schema,
            rows_read=self.rows_read + other.rows_read,
            rows_filtered_language=self.rows_filtered_language + other.rows_filtered_language,
            rows=self.rows + other.rows,
            rows_rejected=self.rows_rejected + other.rows_rejected,
            reject_reasons=dict(Counter(self.reject_reasons) + Counter(other.reject_reasons)),
            accounts=self.accounts + other.accounts,
            hashed_accounts=self.hashed_accounts + other.hashed_accounts,
            defaulted_fields=dict(Counter(self.defaulted_fields) + Counter(other.defaulted_fields)),
            retweet_heuristic_rows=self.retweet_heuristic_rows + other.retweet_heuristic_rows,
            extra_columns=sorted(set(self.extra_columns) | set(other.extra_columns)),
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "dataset": self.dataset,
            "schema": self.schema,
            "rows_read": self.rows_read,
            "rows_filtered_language": self.rows_filtered_language,
            "rows": self.rows,
            "rows_rejected": self.rows_rejected,
            "rows_accepted": self.rows_accepted,
            "reject_reasons": dict(sorted(self.reject_reasons.items())),
            "accounts": self.accounts,
            "hashed_accounts": self.hashed_accounts,
            "defaulted_fields": dict(sorted(self.defaulted_fields.items())),
            "retweet_heuristic_rows": self.retweet_heuristic_rows,
            "extra_columns": list(self.extra_columns),
        }


@dataclass
class Dataset:
    name: str
    accounts: dict[str, AccountProfile]
    tweet_store: TweetStore
    timeframe: tuple[datetime, datetime] | None
    _stats: dict[str, _AccountStats] = field(default_factory=dict, repr=False)

    @property
    def n_tweets(self) -> int:
        return len(self.tweet_store)

    def tweets(self) -> Iterator[TweetRecord]:
        return iter(self.tweet_store)

    def aggregates(self, account_id: str) -> AggregateRecord:
        return account_aggregates(self, account_id)


# -- tokenization -----------------------------------------------------------

def extract_hashtags(text: str | None) -> list[str]:
    """Hashtags in order of appearance, lowercased and without '#'.

    >>> extract_hashtags("Mondays #MustBeBanned")
    ['mustbebanned']
    """
    if not text:
        return []
    out = []
    for tag in _HASHTAG_RE.findall(text):
        # some lowercase mappings emit combining marks, which are not word chars
        norm = _NON_WORD_RE.sub("", tag.lower())
        if norm:
            out.append(norm)
    return out


def normalize_hashtag(tag: str) -> str:
    return _NON_WORD_RE.sub("", tag.strip().lstrip("#").lower())


def extract_mentions(text: str | None) -> list[str]:
    return _MENTION_RE.findall(text) if text else []


def detect_hashed(description: str | None, display_name: str | None = None,
                  pattern: re.Pattern[str] = DEFAULT_HASH_PATTERN) -> bool:
    """True when the profile description is missing or is an opaque hash token."""
    if description is None or not description.strip():
        return True
    return bool(pattern.match(description.strip()))


# -- field parsing ----------------------------------------------------------

_DATE_FORMATS = ("%m/%d/%Y %H:%M", "%m/%d/%Y %H:%M:%S", "%Y-%m-%d %H:%M", "%a %b %d %H:%M:%S %z %Y")


def parse_timestamp(value: str) -> datetime:
    """Parse the timestamp layouts seen in the archives into an aware UTC datetime."""
    s = (value or "").strip()
    if not s:
        raise ValueError("empty timestamp")
    if s.endswith("Z"):
        s = s[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(s)
    except ValueError:
        for fmt in _DATE_FORMATS:
            try:
                dt = datetime.strptime(s, fmt)
                break
            except ValueError:
                continue
        else:
            raise ValueError(f"unparseable timestamp {value!r}") from None
    if dt.tzinfo is None:
        return dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n", ""}


def _parse_bool(value: Any) -> bool | None:
    if value is None:
        return None
    if isinstance(value, bool):
        return value
    s = str(value).strip().lower()
    if s in _TRUE:
        return True
    if s in _FALSE:
        return False if s else None
    return None


def _parse_count(value: Any) -> int | None:
    if value is None or isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return max(int(value), 0)
    s = str(value).strip().replace(",", "")
    if not s:
        return None
    try:
        return max(int(float(s)), 0)
    except ValueError:
        return None


def _parse_list(value: Any) -> list[str]:
    """'[a, b]', "['a', 'b']", 'a,b' or a JSON list -> list of strings."""
    if value is None:
        return []
    if isinstance(value, list):
        return [str(v) for v in value if str(v)]
    s = str(value).strip()
    if not s or s in ("[]", "None", "nan"):
        return []
    s = s.strip("[]")
    return [p.strip().strip("'\"") for p in s.split(",") if p.strip().strip("'\"")]


_LANGUAGE_NAMES = {"english": "en", "russian": "ru", "german": "de", "ukrainian": "uk",
                   "spanish": "es", "french": "fr", "italian": "it", "arabic": "ar"}


def normalize_language(value: Any) -> str:
    s = str(value or "").strip().lower()
    if not s:
        return "und"
    return _LANGUAGE_NAMES.get(s, s)


# -- schema adapters --------------------------------------------------------

class _Defaults:
    """Counts fields that were missing and replaced by 0."""

    def __init__(self) -> None:
        self.counter: Counter[str] = Counter()

    def count(self, name: str, value: Any) -> int:
        n = _parse_count(value)
        if n is None:
            self.counter[name] += 1
            return 0
        return n


class _Adapter:
    name = ""
    required: tuple[str, ...] = ()
    modeled: frozenset[str] = frozenset()
    carries_profile = True

    def __init__(self) -> None:
        self.defaults = _Defaults()
        self.retweet_heuristic = 0

    def check_header(self, columns: Iterable[str]) -> None:
        missing = [c for c in self.required if c not in set(columns)]
        if missing:
            raise SchemaMismatch(f"{self.name}: header lacks required columns {missing}")

    def _retweet(self, flag: Any, text: str) -> bool:
        parsed = _parse_bool(flag)
        if parsed is not None:
            return parsed
        self.retweet_heuristic += 1
        return text.lstrip().startswith("RT @")

    def convert(self, row: dict[str, Any]) -> tuple[TweetRecord, dict[str, str]]:
        raise NotImplementedError


class _AllianceAdapter(_Adapter):
    name = "alliance-tsv"
    required = ("userid", "tweet_time", "tweet_text")
    modeled = frozenset({
        "userid", "tweet_time", "tweet_text", "tweet_language", "is_retweet",
        "in_reply_to_tweetid", "in_reply_to_userid", "like_count", "user_mentions",
        "follower_count", "following_count", "user_display_name", "user_screen_name",
        "user_profile_description", "tweetid", "hashtags",
    })

    def convert(self, row):
        account = (row.get("userid") or "").strip()
        if not account:
            raise RowRejected("missing account id")
        text = row.get("tweet_text") or ""
        try:
            ts = parse_timestamp(row.get("tweet_time") or "")
        except ValueError:
            raise RowRejected("malformed timestamp") from None
        reply = bool((row.get("in_reply_to_tweetid") or "").strip()
                     or (row.get("in_reply_to_userid") or "").strip())
        mentions = _parse_list(row.get("user_mentions")) if "user_mentions" in row else extract_mentions(text)
        rec = TweetRecord(
            account_id=account,
            timestamp=ts,
            text=text,
            is_retweet=self._retweet(row.get("is_retweet"), text),
            is_reply=reply,
            like_count=self.defaults.count("like_count", row.get("like_count")),
            hashtags=tuple(extract_hashtags(text)),
            mentions=tuple(mentions),
            follower_count_at_tweet=self.defaults.count("follower_count", row.get("follower_count")),
            following_count_at_tweet=self.defaults.count("following_count", row.get("following_count")),
            language_tag=normalize_language(row.get("tweet_language") or row.get("account_language")),
        )
        profile = {
            "display_name": row.get("user_display_name") or row.get("user_screen_name") or "",
            "description": row.get("user_profile_description") or "",
        }
        return rec, profile


class _LinvillAdapter(_Adapter):
    name = "linvill-csv"
    required = ("external_author_id", "content", "publish_date")
    modeled = frozenset({
        "external_author_id", "author", "content", "publish_date", "language",
        "following", "followers", "retweet", "post_type",
    })
    carries_profile = False

    def convert(self, row):
        account = (row.get("external_author_id") or "").strip()
        if not account:
            raise RowRejected("missing account id")
        text = row.get("content") or ""
        try:
            ts = parse_timestamp(row.get("publish_date") or "")
        except ValueError:
            raise RowRejected("malformed timestamp") from None
        flag = row.get("retweet")
        if _parse_bool(flag) is None and (row.get("post_type") or "").strip():
            flag = row["post_type"].strip().upper() == "RETWEET"
        rec = TweetRecord(
            account_id=account,
            timestamp=ts,
            text=text,
            is_retweet=self._retweet(flag, text),
            is_reply=text.lstrip().startswith("@"),
            like_count=self.defaults.count("like_count", row.get("like_count")),
            hashtags=tuple(extract_hashtags(text)),
            mentions=tuple(extract_mentions(text)),
            follower_count_at_tweet=self.defaults.count("followers", row.get("followers")),
            following_count_at_tweet=self.defaults.count("following", row.get("following")),
            language_tag=normalize_language(row.get("language")),
        )
        return rec, {"display_name": row.get("author") or ""}


class _JsonlAdapter(_Adapter):
    name = "jsonl"
    required = ("account_id", "timestamp", "text")
    modeled = frozenset({
        "account_id", "timestamp", "text", "is_retweet", "is_reply", "like_count",
        "hashtags", "mentions", "follower_count_at_tweet", "following_count_at_tweet",
        "language_tag", "description", "display_name",
    })

    def convert(self, row):
        account = str(row.get("account_id") or "").strip()
        if not account:
            raise RowRejected("missing account id")
        text = row.get("text") or ""
        raw_ts = row.get("timestamp")
        try:
            ts = parse_timestamp(raw_ts if isinstance(raw_ts, str) else "")
        except ValueError:
            raise RowRejected("malformed timestamp") from None
        if row.get("hashtags") is not None:
            tags = [t for t in (normalize_hashtag(str(h)) for h in _parse_list(row["hashtags"])) if t]
        else:
            tags = extract_hashtags(text)
        if row.get("mentions") is not None:
            mentions = _parse_list(row["mentions"])
        else:
            mentions = extract_mentions(text)
        reply = _parse_bool(row.get("is_reply"))
        rec = TweetRecord(
            account_id=account,
            timestamp=ts,
            text=text,
            is_retweet=self._retweet(row.get("is_retweet"), text),
            is_reply=bool(reply),
            like_count=self.defaults.count("like_count", row.get("like_count")),
            hashtags=tuple(tags),
            mentions=tuple(mentions),
            follower_count_at_tweet=self.defaults.count("follower_count_at_tweet",
                                                        row.get("follower_count_at_tweet")),
            following_count_at_tweet=self.defaults.count("following_count_at_tweet",
                                                         row.get("following_count_at_tweet")),
            language_tag=normalize_language(row.get("language_tag")),
        )
        profile = {k: row[k] for k in ("description", "display_name") if row.get(k)}
        return rec, profile


_ADAPTERS = {a.name: a for a in (_AllianceAdapter, _LinvillAdapter, _JsonlAdapter)}


def record_from_json(obj: dict[str, Any]) -> TweetRecord:
    """Inverse of ``TweetRecord.to_json`` for already-normalized records."""
    return TweetRecord(
        account_id=obj["account_id"],
        timestamp=parse_timestamp(obj["timestamp"]),
        text=obj.get("text", ""),
        is_retweet=bool(obj.get("is_retweet", False)),
        is_reply=bool(obj.get("is_reply", False)),
        like_count=int(obj.get("like_count", 0)),
        hashtags=tuple(obj.get("hashtags", ())),
        mentions=tuple(obj.get("mentions", ())),
        follower_count_at_tweet=int(obj.get("follower_count_at_tweet", 0)),
        following_count_at_tweet=int(obj.get("following_count_at_tweet", 0)),
        language_tag=obj.get("language_tag", "und"),
    )


# -- ingest -----------------------------------------------------------------

def _iter_rows(path: Path, adapter: _Adapter) -> Iterator[tuple[dict[str, Any] | None, str | None]]:
    """Yield (row, None) or (None, reject reason). Raises SchemaMismatch on the header."""
    if adapter.name == "jsonl":
        with open(path, encoding="utf-8") as fh:
            header_checked = False
            for line in fh:
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError:
                    if not header_checked:
                        raise SchemaMismatch("jsonl: first line is not a JSON object") from None
                    yield None, "malformed json"
                    continue
                if not isinstance(obj, dict):
                    yield None, "malformed json"
                    continue
                if not header_checked:
                    adapter.check_header(obj.keys())
                    header_checked = True
                yield obj, None
        return

    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline()
        if not first:
            raise SchemaMismatch(f"{adapter.name}: file has no header")
        if adapter.name == "alliance-tsv":
            delimiter = "\t" if "\t" in first else ","
        else:
            delimiter = "," if "," in first or "\t" not in first else "\t"
        fh.seek(0)
        reader = csv.DictReader(fh, delimiter=delimiter)
        adapter.check_header(reader.fieldnames or [])
        for row in reader:
            if None in row or any(row.get(c) is None for c in adapter.required):
                yield None, "malformed row"
                continue
            yield row, None


def parse_archive(path: str | os.PathLike, schema: str, language_filter: str | None = None,
                  timeframe: tuple[datetime, datetime] | None = None, name: str | None = None,
                  buffer_cap: int = 100_000, hash_pattern: re.Pattern[str] = DEFAULT_HASH_PATTERN,
                  ) -> tuple[Dataset, IngestSummary]:
    """Stream one archive file into a ``Dataset``.

    Rows in another language are skipped (not rejected). Rows with a bad
    timestamp, a missing account id or a timestamp outside ``timeframe``
    are rejected and counted by reason; they never abort the run.
    """
    p = Path(path)
    if schema not in _ADAPTERS:
        raise SchemaMismatch(f"unknown schema {schema!r}; expected one of {SCHEMAS}")
    if not p.is_file() or not os.access(p, os.R_OK):
        raise UnreadableFile(f"cannot read {p}")
    adapter = _ADAPTERS[schema]()
    lang = normalize_language(language_filter) if language_filter else None
    summary = IngestSummary(dataset=name or p.stem, schema=schema)
    store = TweetStore(buffer_cap=buffer_cap)
    stats: dict[str, _AccountStats] = {}
    profiles: dict[str, dict[str, str]] = {}
    extras: dict[str, dict[str, str]] = {}
    extra_cols: set[str] = set()
    rejects: Counter[str] = Counter()
    first_ts = last_ts = None
    first_seen: dict[str, datetime] = {}
    last_seen: dict[str, datetime] = {}

    try:
        rows = _iter_rows(p, adapter)
        for row, bad in rows:
            summary.rows_read += 1
            if bad is not None:
                summary.rows += 1
                rejects[bad] += 1
                continue
            if lang is not None:
                tag = row.get({"alliance-tsv": "tweet_language", "linvill-csv": "language",
                               "jsonl": "language_tag"}[schema])
                if schema == "alliance-tsv" and not tag:
                    tag = row.get("account_language")
                if normalize_language(tag) != lang:
                    summary.rows_filtered_language += 1
                    continue
            summary.rows += 1
            try:
                rec, prof = adapter.convert(row)
            except RowRejected as exc:
                rejects[exc.reason] += 1
                continue
            if timeframe is not None and not (timeframe[0] <= rec.timestamp <= timeframe[1]):
                rejects["outside timeframe"] += 1
                continue
            aid = rec.account_id
            st = stats.get(aid)
            if st is None:
                st = stats[aid] = _AccountStats()
                profiles[aid] = {}
                extras[aid] = {}
                first_seen[aid] = last_seen[aid] = rec.timestamp
            st.add(rec)
            store.append(rec)
            first_seen[aid] = min(first_seen[aid], rec.timestamp)
            last_seen[aid] = max(last_seen[aid], rec.timestamp)
            first_ts = rec.timestamp if first_ts is None else min(first_ts, rec.timestamp)
            last_ts = rec.timestamp if last_ts is None else max(last_ts, rec.timestamp)
            pf = profiles[aid]
            for k, v in prof.items():
                if v and k not in pf:
                    pf[k] = v
            ex = extras[aid]
            for k, v in row.items():
                if k in adapter.modeled or k is None:
                    continue
                extra_cols.add(k)
                if v not in (None, "") and k not in ex:
                    ex[k] = v if isinstance(v, str) else json.dumps(v)
    except UnicodeDecodeError as exc:
        raise UnreadableFile(f"{p}: {exc}") from exc
    except OSError as exc:
        raise UnreadableFile(f"{p}: {exc}") from exc

    accounts = {}
    for aid, st in stats.items():
        pf = profiles[aid]
        desc = pf.get("description") or None
        disp = pf.get("display_name") or None
        if adapter.carries_profile:
            hashed = detect_hashed(desc, disp, hash_pattern)
        else:
            hashed = bool(hash_pattern.match(aid))
        accounts[aid] = AccountProfile(
            account_id=aid,
            is_hashed=hashed,
            display_name=disp,
            description=None if hashed else desc,
            primary_language=_mode_language(st.languages),
            first_seen=first_seen[aid],
            last_seen=last_seen[aid],
            extra=extras[aid],
        )

    summary.rows_rejected = sum(rejects.values())
    summary.reject_reasons = dict(rejects)
    summary.accounts = len(accounts)
    summary.hashed_accounts = sum(a.is_hashed for a in accounts.values())
    summary.defaulted_fields = dict(adapter.defaults.counter)
    summary.retweet_heuristic_rows = adapter.retweet_heuristic
    summary.extra_columns = sorted(extra_cols)
    if adapter.defaults.counter:
        log.warning("%s: missing numeric fields defaulted to 0: %s", p.name, dict(adapter.defaults.counter))
    if summary.rows_rejected:
        log.info("%s: rejected %d rows %s", p.name, summary.rows_rejected, dict(rejects))

    frame = timeframe if timeframe is not None else ((first_ts, last_ts) if first_ts else None)
    ds = Dataset(name=summary.dataset, accounts=accounts, tweet_store=store, timeframe=frame, _stats=stats)
    return ds, summary


def _mode_language(langs: Counter[str]) -> str:
    if not langs:
        return "und"
    return min(langs.items(), key=lambda kv: (-kv[1], kv[0]))[0]


def account_aggregates(dataset: Dataset, account_id: str) -> AggregateRecord:
    if account_id not in dataset.accounts:
        raise UnknownAccount(account_id)
    st = dataset._stats.get(account_id)
    return st.record() if st is not None else AggregateRecord()


# -- canonical dataset dump / reload -----------------------------------------

def write_jsonl(records: Iterable[TweetRecord], path: str | os.PathLike,
                profiles: dict[str, AccountProfile] | None = None) -> int:
    """Write records as canonical JSONL; profile fields go on each account's first line."""
    n = 0
    seen: set[str] = set()
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            obj = rec.to_json()
            if profiles is not None and rec.account_id not in seen:
                seen.add(rec.account_id)
                prof = profiles.get(rec.account_id)
                if prof is not None:
                    if prof.description:
                        obj["description"] = prof.description
                    if prof.display_name:
                        obj["display_name"] = prof.display_name
            fh.write(json.dumps(obj, ensure_ascii=False, sort_keys=True))
            fh.write("\n")
            n += 1
    return n


def save_dataset(dataset: Dataset, directory: str | os.PathLike) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_jsonl(dataset.tweets(), d / "tweets.jsonl")
    meta = {
        "name": dataset.name,
        "timeframe": [t.isoformat() for t in dataset.timeframe] if dataset.timeframe else None,
        "accounts": [dataset.accounts[a].to_json() for a in sorted(dataset.accounts)],
    }
    (d / "accounts.json").write_text(json.dumps(meta, indent=1, sort_keys=True, ensure_ascii=False),
                                     encoding="utf-8")


def load_dataset(directory: str | os.PathLike, buffer_cap: int = 100_000) -> Dataset:
    """Reload a dataset written by ``save_dataset`` (profiles are restored verbatim)."""
    d = Path(directory)
    try:
        meta = json.loads((d / "accounts.json").read_text(encoding="utf-8"))
    except OSError as exc:
        raise UnreadableFile(str(exc)) from exc
    accounts = {a["account_id"]: AccountProfile.from_json(a) for a in meta["accounts"]}
    store = TweetStore(buffer_cap=buffer_cap)
    stats: dict[str, _AccountStats] = {}
    with open(d / "tweets.jsonl", encoding="utf-8") as fh:
        for line in fh:
            rec = record_from_json(json.loads(line))
            stats.setdefault(rec.account_id, _AccountStats()).add(rec)
            store.append(rec)
    frame = tuple(parse_timestamp(t) for t in meta["timeframe"]) if meta.get("timeframe") else None
    return Dataset(name=meta["name"], accounts=accounts, tweet_store=store, timeframe=frame, _stats=stats)


def merge_datasets(parts: Sequence[Dataset], name: str | None = None, buffer_cap: int = 100_000) -> Dataset:
    """Concatenate datasets; the first profile seen for an account wins."""
    if len(parts) == 1:
        return parts[0]
    accounts: dict[str, AccountProfile] = {}
    store = TweetStore(buffer_cap=buffer_cap)
    stats: dict[str, _AccountStats] = {}
    frames = []
    for ds in parts:
        for aid, prof in ds.accounts.items():
            accounts.setdefault(aid, prof)
        for rec in ds.tweets():
            stats.setdefault(rec.account_id, _AccountStats()).add(rec)
            store.append(rec)
        if ds.timeframe:
            frames.append(ds.timeframe)
    frame = (min(f[0] for f in frames), max(f[1] for f in frames)) if frames else None
    return Dataset(name=name or "+".join(ds.name for ds in parts), accounts=accounts,
                   tweet_store=store, timeframe=frame, _stats=stats)
