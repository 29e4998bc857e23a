import csv
import json
import random
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest

from footprint.categories import CATEGORIES
from footprint.corpus import detect_hashed, parse_archive
from footprint.labeling import load_seed_labels
from footprint.synthgen import (
    RATIO_CAP,
    CATEGORY_TOTALS,
    BehaviorProfile,
    GeneratorConfig,
    GroundTruth,
    InvalidConfig,
    default_pools,
    generate,
    planted_rule_samples,
    verify_generation,
)

FN, ORG, PA, DI = CATEGORIES


def small(seed, **kw):
    return GeneratorConfig.from_mapping({"seed": seed, "accounts_per_category": 20, "tweet_scale": 0.02, **kw})


class TestGenerate:
    def test_same_seed_byte_identical(self, tmp_path):
        cfg = small(3)
        generate(cfg, tmp_path / "a")
        generate(cfg, tmp_path / "b")
        for name in ("archive.jsonl", "labels.csv", "ground_truth.csv", "reference_labels.csv",
                     "generator_config.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        generate(small(4), tmp_path / "c")
        assert (tmp_path / "a" / "archive.jsonl").read_bytes() != (tmp_path / "c" / "archive.jsonl").read_bytes()

    def test_default_counts(self, synthetic_default):
        truth = synthetic_default.truth
        assert len(truth.categories) == 400
        assert sum(truth.hashed.values()) == 100
        assert Counter(truth.categories.values()) == {c: 100 for c in CATEGORIES}
        assert Counter(c for a, c in truth.categories.items() if truth.hashed[a]) == {c: 25 for c in CATEGORIES}
        with open(synthetic_default.labels, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 300
        assert all(not truth.hashed[r["account_id"]] for r in rows)

    def test_archive_parses_and_hashed_accounts_look_hashed(self, synthetic_default):
        ds, summary = parse_archive(synthetic_default.archive, "jsonl")
        assert summary.rows_rejected == 0 and len(ds.accounts) == 400 and summary.hashed_accounts == 100
        for a, prof in ds.accounts.items():
            assert prof.is_hashed == detect_hashed(prof.description) == synthetic_default.truth.hashed[a]

    def test_behavior_follows_profiles(self, synthetic_default):
        ds, _ = parse_archive(synthetic_default.archive, "jsonl")
        truth = synthetic_default.truth.categories
        reply = {c: [0, 0] for c in CATEGORIES}
        for t in ds.tweets():
            r = reply[truth[t.account_id]]
            r[0] += t.is_reply
            r[1] += 1
        rate = {c: a / b for c, (a, b) in reply.items()}
        assert rate[PA] > 5 * rate[FN]

    def test_labels_load_as_seed_labels(self, synthetic_small):
        _, corpus = synthetic_small
        seeds = load_seed_labels(corpus.labels)
        assert all(corpus.truth.categories[a] is seeds.category(a) for a in seeds.labels)
        assert len(seeds) == 44

    def test_reference_labels(self, synthetic_default):
        with open(synthetic_default.archive.parent / "reference_labels.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert {r["category"] for r in rows} == {"NewsFeed", "HashtagGamer", "RightTroll", "Fearmonger"}

    def test_noise_free_pools_are_pure(self, tmp_path):
        cfg = small(5, noise=0.0)
        generate(cfg, tmp_path)
        truth = GroundTruth.read_csv(tmp_path / "ground_truth.csv")
        pools = {c: set(p) for c, p in cfg.pools.items()}
        for line in (tmp_path / "archive.jsonl").read_text().splitlines():
            obj = json.loads(line)
            assert set(obj.get("hashtags") or []) <= pools[truth.categories[obj["account_id"]]]

    def test_truth_roundtrip(self, tmp_path, synthetic_small):
        _, corpus = synthetic_small
        corpus.truth.write_csv(tmp_path / "t.csv")
        back = GroundTruth.read_csv(tmp_path / "t.csv")
        assert back == corpus.truth


class TestConfig:
    def test_profiles_from_table(self):
        p = BehaviorProfile.from_totals(FN)
        n, tweets, retweets = CATEGORY_TOTALS[FN][:3]
        assert p.mean_tweets == pytest.approx(tweets / n)
        assert p.retweet_ratio == pytest.approx(min(retweets / tweets, RATIO_CAP))
        for c in CATEGORIES:
            prof = BehaviorProfile.from_totals(c)
            assert 0 <= prof.retweet_ratio <= RATIO_CAP and 0 <= prof.reply_ratio <= RATIO_CAP

    def test_pools_seeded_and_disjoint(self):
        pools = default_pools(12)
        assert all(len(p) == 12 for p in pools.values())
        flat = [h for p in pools.values() for h in p]
        assert len(flat) == len(set(flat))
        assert "maga" in pools[PA]

    def test_from_mapping(self, tmp_path):
        cfg = GeneratorConfig.from_mapping({"accounts_per_category": {"FakeNews": 3}, "hashed_fraction": 0.5,
                                            "profiles": {"FakeNews": {"reply_ratio": 0.2}}, "pool_size": 5})
        assert cfg.accounts_per_category[FN] == 3 and cfg.accounts_per_category[DI] == 100
        assert cfg.hashed_fraction == {c: 0.5 for c in CATEGORIES}
        assert cfg.profiles[FN].reply_ratio == 0.2 and len(cfg.pools[ORG]) == 5
        (tmp_path / "g.toml").write_text('seed = 99\nnoise = 0.0\nstart = "2016-01-01T00:00:00Z"\n')
        loaded = GeneratorConfig.load(tmp_path / "g.toml")
        assert (loaded.seed, loaded.noise, loaded.start.year) == (99, 0.0, 2016)

    @pytest.mark.parametrize("bad", [
        {"noise": 1.5},
        {"accounts_per_category": -1},
        {"hashed_fraction": 2.0},
        {"tweet_scale": 0},
        {"min_tweets": 0},
        {"start": "2019-01-01T00:00:00Z"},
        {"pools": {"FakeNews": []}},
        {"profiles": {"Organizations": {"retweet_ratio": 1.2}}},
    ])
    def test_invalid(self, bad):
        with pytest.raises(InvalidConfig):
            GeneratorConfig.from_mapping(bad)


class TestVerify:
    def test_fresh_archive_passes(self, synthetic_default):
        rep = verify_generation(synthetic_default.archive.parent, GeneratorConfig())
        assert rep.ok, [(c.category, c.statistic, c.z) for c in rep.flags]
        assert len(rep.checks) == 36 and json.dumps(rep.to_json())

    def test_flag_rate_over_many_seeds(self, tmp_path):
        flags = checks = 0
        for seed in range(100):
            cfg = small(seed)
            out = tmp_path / str(seed)
            generate(cfg, out)
            rep = verify_generation(out, cfg)
            flags += len(rep.flags)
            checks += len(rep.checks)
        assert flags / checks <= 0.01

    def test_shuffled_labels_fail_purity(self, synthetic_small):
        cfg, corpus = synthetic_small
        ids = sorted(corpus.truth.categories)
        cats = [corpus.truth.categories[a] for a in ids]
        random.Random(0).shuffle(cats)
        shuffled = GroundTruth(dict(zip(ids, cats)), dict(corpus.truth.hashed))
        rep = verify_generation(corpus.archive, cfg, shuffled)
        assert "pool_purity" in {c.statistic for c in rep.flags}
        assert verify_generation(corpus.archive, cfg, corpus.truth).ok

    def test_empty_archive_is_vacuous_pass(self, tmp_path):
        (tmp_path / "archive.jsonl").write_text("")
        GroundTruth({}, {}).write_csv(tmp_path / "ground_truth.csv")
        rep = verify_generation(tmp_path, GeneratorConfig())
        assert rep.ok and rep.checks == []

    def test_truth_required_for_plain_file(self, synthetic_small):
        _, corpus = synthetic_small
        with pytest.raises(ValueError):
            verify_generation(corpus.archive, GeneratorConfig())

    def test_wrong_profile_is_flagged(self, synthetic_small):
        cfg, corpus = synthetic_small
        other = replace(cfg, profiles={**cfg.profiles, PA: replace(cfg.profiles[PA], reply_ratio=0.01)})
        rep = verify_generation(corpus.archive.parent, other)
        assert ("PoliticalAffiliates", "reply_ratio") in {(c.category, c.statistic) for c in rep.flags}


class TestPlantedRule:
    def test_shape_and_determinism(self):
        ids, X, labels = planted_rule_samples(n=200, d=5, seed=2)
        assert X.shape == (200, 5) and len(ids) == len(labels) == 200
        again = planted_rule_samples(n=200, d=5, seed=2)
        assert np.array_equal(again[1], X) and again[2] == labels

    def test_noise_free_labels_follow_rule(self):
        ids, X, labels = planted_rule_samples(n=300, label_noise=0.0)
        for a, (x0, x1, x2) in zip(ids, X[:, :3]):
            if x0 <= 0.5:
                want = FN if x1 <= 0.5 else (ORG if x2 <= 0.5 else PA)
            else:
                want = PA if x2 <= 0.3 else (DI if x1 <= 0.7 else FN)
            assert labels[a] is want
