"""Deterministic synthetic archives with planted categories.

Behavior profiles come from per-category archive totals (``CATEGORY_TOTALS``:
per-tweet ratios, per-account means); hashtag pools are seeded with the
shipped footprint hashtags. Everything else here
(Poisson counts, log-normal follower levels, uniform timestamps) is a
modeling choice of this generator, not a property of the real archives.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy import stats

from footprint.categories import CATEGORIES, Category
from footprint.corpus import parse_timestamp

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class InvalidConfig(ValueError):
    pass


# Category totals: N, tweets, retweets, mentions, avg followers, avg following,
# hashtags, replies, likes.
CATEGORY_TOTALS = {
    Category.FAKE_NEWS: (136, 91_539, 78_036, 119_093, 9_137.65, 3_858.04, 116_919, 5_348, 39_073),
    Category.ORGANIZATIONS: (101, 158_605, 44_529, 63_172, 27_593.52, 6_364.18, 129_838, 7_508, 78_892),
    Category.POLITICAL_AFFILIATES: (595, 323_714, 162_419, 594_701, 5_126.85, 3_144.11, 273_813,
                                    196_641, 6_487_172),
    Category.DEFAULT_INDIVIDUALS: (2_000, 1_337_698, 795_594, 1_425_592, 11_339.62, 5_601.21,
                                   1_474_905, 1_490_090, 23_487_246),
}

# Bernoulli flags cannot exceed 1; the individuals' reply total exceeds their tweet total.
RATIO_CAP = 0.95


@dataclass(frozen=True)
class BehaviorProfile:
    mean_tweets: float
    retweet_ratio: float
    reply_ratio: float
    hashtag_rate: float
    mention_rate: float
    like_rate: float
    followers_mean: float
    following_mean: float

    @classmethod
    def from_totals(cls, cat: Category) -> BehaviorProfile:
        n, tw, rt, men, fol, fing, tags, rep, likes = CATEGORY_TOTALS[cat]
        return cls(
            mean_tweets=tw / n,
            retweet_ratio=min(rt / tw, RATIO_CAP),
            reply_ratio=min(rep / tw, RATIO_CAP),
            hashtag_rate=tags / tw,
            mention_rate=men / tw,
            like_rate=likes / tw,
            followers_mean=fol,
            following_mean=fing,
        )


_POOL_SEEDS = {
    Category.FAKE_NEWS: ["news", "topnews", "rostov", "rostovnadon"],
    Category.ORGANIZATIONS: ["cityofchester", "blacklivesmatter", "secede", "texas", "acab", "chester"],
    Category.POLITICAL_AFFILIATES: ["maga", "tcot", "defundobamacare", "standwithcruz", "pjnet", "teaparty"],
    Category.DEFAULT_INDIVIDUALS: ["music", "mutualfollowing", "todolistbeforechristmas",
                                   "wakeupamerica", "rednationrising"],
}
_POOL_PREFIX = {Category.FAKE_NEWS: "headline", Category.ORGANIZATIONS: "community",
                Category.POLITICAL_AFFILIATES: "vote", Category.DEFAULT_INDIVIDUALS: "mylife"}

_DESCRIPTIONS = {
    Category.FAKE_NEWS: [
        "Local news, sports, business, politics, entertainment, travel and opinion for {city}. DM us 24/7",
        "{city}'s latest news source. Follow us for original reporting and trusted news",
        "Breaking news, weather, traffic and more for {city}. DM us anytime. RTs not endorsements",
        "{city} top news and stories, powered 24/7",
    ],
    Category.ORGANIZATIONS: [
        "Non-Governmental Organization (NGO)",
        "We are a club of people who love {city}. Follow us or visit our website.",
        "Official Twitter account for the online magazine of {city} residents.",
        "Welcome to the official Department of Space Twitter account!",
    ],
    Category.POLITICAL_AFFILIATES: [
        "Constitutional conservative-Pro life-Pro 2nd amendment-Christian",
        "Conservative; Right and proud; Christian. Love my country.",
        "Political & Military Analyst",
        "Liberal voice from {city}. Resist.",
    ],
    Category.DEFAULT_INDIVIDUALS: [
        "Every child is an artist. The problem is how to remain an artist once he grows up.",
        "Social media enthusiast. Wannabe creator. General internet expert. Hardcore introvert.",
        "When in danger or in doubt, run in circles, scream and shout",
        "warm as the sun, dipped in black. full time protagonist",
    ],
}
_CITIES = ["Detroit", "Newark", "Houston", "Memphis", "Pittsburgh", "Kansas City", "New Orleans", "Chicago"]
_PHRASES = ["Check this out", "Can't believe this", "Today in town", "Read more", "What do you think",
            "Big day", "Just saw this", "Update"]

# reference coding styled after the external troll-type taxonomy
REFERENCE_CODING = {
    Category.FAKE_NEWS: "NewsFeed",
    Category.ORGANIZATIONS: "HashtagGamer",
    Category.POLITICAL_AFFILIATES: "RightTroll",
    Category.DEFAULT_INDIVIDUALS: "Fearmonger",
}


def default_pools(pool_size: int = 12) -> dict[Category, list[str]]:
    pools = {}
    for c in CATEGORIES:
        seeds = list(_POOL_SEEDS[c])
        i = 1
        while len(seeds) < pool_size:
            seeds.append(f"{_POOL_PREFIX[c]}{i:02d}")
            i += 1
        pools[c] = seeds[:pool_size]
    return pools


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 7
    accounts_per_category: Mapping[Category, int] = field(
        default_factory=lambda: {c: 100 for c in CATEGORIES})
    hashed_fraction: Mapping[Category, float] = field(
        default_factory=lambda: {c: 0.25 for c in CATEGORIES})
    start: datetime = datetime(2015, 1, 1, tzinfo=timezone.utc)
    end: datetime = datetime(2018, 1, 1, tzinfo=timezone.utc)
    profiles: Mapping[Category, BehaviorProfile] = field(
        default_factory=lambda: {c: BehaviorProfile.from_totals(c) for c in CATEGORIES})
    pools: Mapping[Category, list[str]] = field(default_factory=default_pools)
    noise: float = 0.1
    tweet_scale: float = 0.05
    min_tweets: int = 5
    follower_sigma: float = 0.5

    def validate(self) -> None:
        for c in CATEGORIES:
            if self.accounts_per_category.get(c, 0) < 0:
                raise InvalidConfig(f"negative account count for {c.value}")
            f = self.hashed_fraction.get(c, 0.0)
            if not 0 <= f <= 1:
                raise InvalidConfig(f"hashed fraction for {c.value} outside [0, 1]")
            if not self.pools.get(c):
                raise InvalidConfig(f"empty hashtag pool for {c.value}")
            p = self.profiles[c]
            if not (0 <= p.retweet_ratio <= 1 and 0 <= p.reply_ratio <= 1):
                raise InvalidConfig(f"{c.value}: ratios must be in [0, 1]")
            if min(p.mean_tweets, p.hashtag_rate, p.mention_rate, p.like_rate,
                   p.followers_mean, p.following_mean) < 0:
                raise InvalidConfig(f"{c.value}: negative profile value")
        if not 0 <= self.noise <= 1:
            raise InvalidConfig("noise must be in [0, 1]")
        if self.end <= self.start:
            raise InvalidConfig("end must be after start")
        if self.tweet_scale <= 0 or self.min_tweets < 1 or self.follower_sigma < 0:
            raise InvalidConfig("tweet_scale > 0, min_tweets >= 1, follower_sigma >= 0 required")

    def expected_tweets(self, c: Category) -> float:
        return self.profiles[c].mean_tweets * self.tweet_scale

    def hashed_count(self, c: Category) -> int:
        return int(round(self.accounts_per_category.get(c, 0) * self.hashed_fraction.get(c, 0.0)))

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "accounts_per_category": {c.value: n for c, n in self.accounts_per_category.items()},
            "hashed_fraction": {c.value: f for c, f in self.hashed_fraction.items()},
            "start": self.start.isoformat(),
            "end": self.end.isoformat(),
            "profiles": {c.value: asdict(p) for c, p in self.profiles.items()},
            "pools": {c.value: list(p) for c, p in self.pools.items()},
            "noise": self.noise,
            "tweet_scale": self.tweet_scale,
            "min_tweets": self.min_tweets,
            "follower_sigma": self.follower_sigma,
        }

    @classmethod
    def from_mapping(cls, obj: Mapping) -> GeneratorConfig:
        """Build from a flat mapping (a TOML table); omitted keys keep defaults.

        Scalars for ``accounts_per_category``/``hashed_fraction`` apply to all
        categories; ``profiles`` entries may override single fields.
        """
        base = cls()
        kw: dict = {}
        for key in ("seed", "noise", "tweet_scale", "min_tweets", "follower_sigma"):
            if key in obj:
                kw[key] = obj[key]
        for key in ("start", "end"):
            if key in obj:
                v = obj[key]
                kw[key] = parse_timestamp(v) if isinstance(v, str) else _aware(v)
        for key in ("accounts_per_category", "hashed_fraction"):
            if key in obj:
                v = obj[key]
                kw[key] = ({c: v for c in CATEGORIES} if not isinstance(v, Mapping)
                           else {**getattr(base, key), **{Category.parse(k): x for k, x in v.items()}})
        if "profiles" in obj:
            prof = dict(base.profiles)
            for k, v in obj["profiles"].items():
                c = Category.parse(k)
                prof[c] = replace(prof[c], **v)
            kw["profiles"] = prof
        if "pool_size" in obj:
            kw["pools"] = default_pools(int(obj["pool_size"]))
        if "pools" in obj:
            pools = dict(kw.get("pools", base.pools))
            pools.update({Category.parse(k): [str(t).lower().lstrip("#") for t in v]
                          for k, v in obj["pools"].items()})
            kw["pools"] = pools
        cfg = replace(base, **kw)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | os.PathLike) -> GeneratorConfig:
        with open(path, "rb") as fh:
            return cls.from_mapping(tomllib.load(fh))


def _aware(v):
    if isinstance(v, datetime):
        return v if v.tzinfo else v.replace(tzinfo=timezone.utc)
    return datetime(v.year, v.month, v.day, tzinfo=timezone.utc)


@dataclass
class GroundTruth:
    categories: dict[str, Category]
    hashed: dict[str, bool]

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["account_id", "category", "hashed"])
            for a in sorted(self.categories):
                w.writerow([a, self.categories[a].value, int(self.hashed[a])])

    @classmethod
    def read_csv(cls, path) -> GroundTruth:
        cats, hashed = {}, {}
        with open(path, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                cats[row["account_id"]] = Category.parse(row["category"])
                hashed[row["account_id"]] = row.get("hashed", "0") in ("1", "true", "True")
        return cls(cats, hashed)


@dataclass
class GeneratedCorpus:
    archive: Path
    labels: Path
    truth_path: Path
    truth: GroundTruth
    n_tweets: int


def _pick(rng: np.random.Generator, pool: list[str], weights: np.ndarray) -> str:
    return pool[int(rng.choice(len(pool), p=weights))]


def generate(config: GeneratorConfig, out_dir: str | os.PathLike) -> GeneratedCorpus:
    """Write ``archive.jsonl``, ``labels.csv`` (unhashed accounts only),
    ``ground_truth.csv``, ``reference_labels.csv`` and ``generator_config.json``.

    Output bytes depend only on the config (including its seed).
    """
    config.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x5F00]))
    pool_weights = {}
    for c in CATEGORIES:
        w = 1.0 / np.arange(1, len(config.pools[c]) + 1)
        pool_weights[c] = w / w.sum()

    accounts: list[tuple[str, Category, bool]] = []
    serial = 0
    for c in CATEGORIES:
        n = config.accounts_per_category.get(c, 0)
        hashed_idx = set(rng.permutation(n)[:config.hashed_count(c)].tolist()) if n else set()
        for i in range(n):
            serial += 1
            hashed = i in hashed_idx
            if hashed:
                aid = hashlib.sha256(f"{config.seed}:{serial}".encode()).hexdigest()
            else:
                aid = str(10_000_000 + config.seed * 100_000 + serial)
            accounts.append((aid, c, hashed))
    all_ids = [a for a, _, _ in accounts]

    span = (config.end - config.start).total_seconds()
    rows = []
    for aid, c, hashed in accounts:
        p = config.profiles[c]
        n_tw = max(config.min_tweets, int(rng.poisson(p.mean_tweets * config.tweet_scale)))
        s = config.follower_sigma
        followers = int(round(rng.lognormal(math.log(max(p.followers_mean, 1e-9)) - s * s / 2, s)))
        following = int(round(rng.lognormal(math.log(max(p.following_mean, 1e-9)) - s * s / 2, s)))
        desc = None
        if not hashed:
            desc = _DESCRIPTIONS[c][int(rng.integers(len(_DESCRIPTIONS[c])))].format(
                city=_CITIES[int(rng.integers(len(_CITIES)))])
        others = [x for x in CATEGORIES if x is not c]
        for t in range(n_tw):
            ts = config.start + timedelta(seconds=int(rng.integers(0, int(span))))
            is_rt = bool(rng.random() < p.retweet_ratio)
            is_reply = bool(rng.random() < p.reply_ratio)
            tags = []
            for _ in range(int(rng.poisson(p.hashtag_rate))):
                src = c
                if config.noise > 0 and rng.random() < config.noise:
                    src = others[int(rng.integers(len(others)))]
                tags.append(_pick(rng, config.pools[src], pool_weights[src]))
            mentions = [all_ids[int(rng.integers(len(all_ids)))] for _ in range(int(rng.poisson(p.mention_rate)))]
            likes = int(rng.poisson(p.like_rate))
            phrase = _PHRASES[int(rng.integers(len(_PHRASES)))]
            body = " ".join([phrase, *(f"#{h}" for h in tags), *(f"@{m}" for m in mentions[1:] if is_rt),
                             *(f"@{m}" for m in mentions if not is_rt)])
            text = f"RT @{mentions[0]}: {body}" if is_rt and mentions else body
            obj = {
                "account_id": aid,
                "timestamp": ts.isoformat(),
                "text": text,
                "is_retweet": is_rt,
                "is_reply": is_reply,
                "like_count": likes,
                "hashtags": tags,
                "mentions": mentions,
                "follower_count_at_tweet": followers,
                "following_count_at_tweet": following,
                "language_tag": "en",
            }
            if t == 0 and desc:
                obj["description"] = desc
                obj["display_name"] = f"{c.value}_{aid[-4:]}"
            rows.append((ts, aid, t, obj))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))

    archive = out / "archive.jsonl"
    with open(archive, "w", encoding="utf-8", newline="\n") as fh:
        for _, _, _, obj in rows:
            fh.write(json.dumps(obj, sort_keys=True, ensure_ascii=False))
            fh.write("\n")
    labels = out / "labels.csv"
    with open(labels, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["account_id", "category"])
        for aid, c, hashed in sorted(accounts):
            if not hashed:
                w.writerow([aid, c.value])
    truth = GroundTruth({a: c for a, c, _ in accounts}, {a: h for a, _, h in accounts})
    truth_path = out / "ground_truth.csv"
    truth.write_csv(truth_path)
    with open(out / "reference_labels.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["account_id", "category"])
        for aid, c, _ in sorted(accounts):
            w.writerow([aid, REFERENCE_CODING[c]])
    (out / "generator_config.json").write_text(json.dumps(config.to_json(), indent=1, sort_keys=True) + "\n",
                                              encoding="utf-8")
    return GeneratedCorpus(archive, labels, truth_path, truth, len(rows))


# -- verification ----------------------------------------------------------

@dataclass
class Check:
    category: str
    statistic: str
    expected: float
    observed: float
    stderr: float
    flagged: bool

    @property
    def z(self) -> float:
        return (self.observed - self.expected) / self.stderr if self.stderr > 0 else 0.0


@dataclass
class VerificationReport:
    checks: list[Check]
    sigma: float

    @property
    def flags(self) -> list[Check]:
        return [c for c in self.checks if c.flagged]

    @property
    def ok(self) -> bool:
        return not self.flags

    def to_json(self) -> dict:
        return {"sigma": self.sigma, "ok": self.ok,
                "checks": [{**asdict(c), "z": c.z} for c in self.checks]}


def _floored_poisson_moments(lam: float, floor: int) -> tuple[float, float]:
    """Mean and variance of max(floor, Poisson(lam))."""
    ks = np.arange(floor)
    pmf = stats.poisson.pmf(ks, lam)
    mean = lam + float(np.sum((floor - ks) * pmf))
    second = lam + lam * lam + float(np.sum((floor * floor - ks * ks) * pmf))
    return mean, max(second - mean * mean, 0.0)


def verify_generation(archive: str | os.PathLike, config: GeneratorConfig,
                      truth: GroundTruth | str | os.PathLike | None = None,
                      sigma: float = 3.0) -> VerificationReport:
    """Compare per-category empirical statistics of an archive against the
    configured profile; anything more than ``sigma`` standard errors away
    is flagged. Also checks that hashtags come from the account's own pool
    at the configured rate (pool purity).
    """
    path = Path(archive)
    if path.is_dir():
        truth = truth if truth is not None else path / "ground_truth.csv"
        path = path / "archive.jsonl"
    if truth is None:
        raise ValueError("ground truth required")
    gt = truth if isinstance(truth, GroundTruth) else GroundTruth.read_csv(truth)
    pool_of = {}
    for c in CATEGORIES:
        for h in config.pools[c]:
            pool_of.setdefault(h, set()).add(c)

    per_acc: dict[str, dict] = {}
    tw = {c: dict(n=0, rt=0, rep=0, tags=0, men=0, likes=0, own=0) for c in CATEGORIES}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            aid = obj["account_id"]
            c = gt.categories[aid]
            t = tw[c]
            t["n"] += 1
            t["rt"] += bool(obj.get("is_retweet"))
            t["rep"] += bool(obj.get("is_reply"))
            tags = obj.get("hashtags") or []
            t["tags"] += len(tags)
            t["own"] += sum(c in pool_of.get(h, ()) for h in tags)
            t["men"] += len(obj.get("mentions") or [])
            t["likes"] += int(obj.get("like_count", 0))
            a = per_acc.setdefault(aid, {"n": 0, "fol": obj.get("follower_count_at_tweet", 0),
                                         "fing": obj.get("following_count_at_tweet", 0)})
            a["n"] += 1

    checks: list[Check] = []

    def add(c, name, expected, observed, se):
        flagged = se > 0 and abs(observed - expected) > sigma * se or (se == 0 and observed != expected)
        checks.append(Check(c.value, name, float(expected), float(observed), float(se), bool(flagged)))

    for c in CATEGORIES:
        p = config.profiles[c]
        accs = [a for aid, a in per_acc.items() if gt.categories[aid] is c]
        t = tw[c]
        if not accs or t["n"] == 0:
            continue
        n_acc, n = len(accs), t["n"]
        m, v = _floored_poisson_moments(p.mean_tweets * config.tweet_scale, config.min_tweets)
        add(c, "tweets_per_account", m, sum(a["n"] for a in accs) / n_acc, math.sqrt(v / n_acc))
        for name, prob, key in (("retweet_ratio", p.retweet_ratio, "rt"), ("reply_ratio", p.reply_ratio, "rep")):
            add(c, name, prob, t[key] / n, math.sqrt(prob * (1 - prob) / n))
        for name, lam, key in (("hashtag_rate", p.hashtag_rate, "tags"), ("mention_rate", p.mention_rate, "men"),
                               ("like_rate", p.like_rate, "likes")):
            add(c, name, lam, t[key] / n, math.sqrt(lam / n))
        s2 = math.exp(config.follower_sigma ** 2) - 1
        for name, mean, key in (("followers", p.followers_mean, "fol"), ("following", p.following_mean, "fing")):
            # integer rounding of the draws adds at most 0.5
            se = math.sqrt(mean * mean * s2 / n_acc + 1 / 12)
            add(c, name, mean, sum(a[key] for a in accs) / n_acc, se)
        if t["tags"]:
            own_other = _own_pool_rate(config, c)
            add(c, "pool_purity", own_other, t["own"] / t["tags"],
                math.sqrt(max(own_other * (1 - own_other), 1e-12) / t["tags"]))
    return VerificationReport(checks, sigma)


def _own_pool_rate(config: GeneratorConfig, c: Category) -> float:
    """Probability that one hashtag draw of category c lies in c's own pool."""
    own = set(config.pools[c])
    others = [x for x in CATEGORIES if x is not c]

    def mass(src: Category) -> float:
        pool = config.pools[src]
        w = 1.0 / np.arange(1, len(pool) + 1)
        w /= w.sum()
        return float(sum(wi for h, wi in zip(pool, w) if h in own))

    return (1 - config.noise) * mass(c) + config.noise * sum(mass(o) for o in others) / len(others)


# -- planted decision rule -------------------------------------------------

def planted_rule_samples(n: int = 600, d: int = 6, label_noise: float = 0.15, seed: int = 0
                         ) -> tuple[list[str], np.ndarray, dict[str, Category]]:
    """Samples whose category is fixed by a depth-3 threshold rule on the
    first three features (the rest are distractors), with a share of labels
    flipped at random so deep trees overfit.

    Rule: x0 <= 0.5 ? (x1 <= 0.5 ? FN : (x2 <= 0.5 ? Org : PA))
                    : (x2 <= 0.3 ? PA : (x1 <= 0.7 ? DI : FN))
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x7233]))
    X = rng.random((n, d))
    y = np.empty(n, dtype=np.int64)
    for i, (x0, x1, x2) in enumerate(X[:, :3]):
        if x0 <= 0.5:
            y[i] = 0 if x1 <= 0.5 else (1 if x2 <= 0.5 else 2)
        else:
            y[i] = 2 if x2 <= 0.3 else (3 if x1 <= 0.7 else 0)
    flip = rng.random(n) < label_noise
    y[flip] = rng.integers(0, len(CATEGORIES), size=int(flip.sum()))
    ids = [f"s{i:05d}" for i in range(n)]
    return ids, X, {a: CATEGORIES[int(c)] for a, c in zip(ids, y)}
