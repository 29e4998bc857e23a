"""Exit criteria, one test per criterion. Each prints a PASS/FAIL line."""

import math
import os
import random
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from footprint.categories import CATEGORIES, Category
from footprint.classifiers import TrainConfig
from footprint.classifiers.baselines import train_baseline
from footprint.classifiers.forest import train_forest
from footprint.cli import main
from footprint.corpus import parse_archive
from footprint.evaluation import (
    ConfusionMatrix,
    cross_validate,
    depth_sweep,
    metrics_from_confusion,
    stratified_folds,
)
from footprint.labeling import Provenance, SeedLabelSet, load_seed_labels
from footprint.pipeline import Pipeline, PipelineConfig, run_pipeline
from footprint.propagation import propagate
from footprint.synthgen import GeneratorConfig, generate, planted_rule_samples
from footprint.classifiers.forest import train_tree
from oracles import (
    confusion_metrics,
    exhaustive_tree,
    random_propagation_fixture,
    random_tree_fixture,
    tree_as_tuples,
)

pytestmark = pytest.mark.acceptance


@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    """Default synthetic corpus through the full pipeline, single-threaded."""
    root = tmp_path_factory.mktemp("acc_default")
    t0 = time.perf_counter()
    assert main(["synth", "--out", str(root / "syn")]) == 0
    cfg = PipelineConfig.load(root / "syn" / "pipeline.toml", out=root / "run1", threads=1)
    report = run_pipeline(cfg)
    return cfg, report, time.perf_counter() - t0


def test_criterion_1_propagation_oracle(make_dataset, criterion):
    rng = random.Random(20240601)
    elapsed = 0.0
    mismatches = []
    for i in range(20):
        rows, labels, expected = random_propagation_fixture(rng)
        assert len({r["account_id"] for r in rows}) <= 10
        ds, _ = make_dataset(rows)
        seeds = SeedLabelSet()
        for a, c in labels.items():
            seeds.add(a, c, Provenance.CODED_FILE)
        t0 = time.perf_counter()
        res = propagate(ds, seeds)
        elapsed += time.perf_counter() - t0
        assert len(res.subspans) <= 3
        if set(res.final) != set(expected):
            mismatches.append((i, "accounts"))
            continue
        for a, (cat, conf, trail) in expected.items():
            got_cat, got_conf = res.final[a]
            entries = res.assignments[a].entries
            ok = got_cat is cat and math.isclose(got_conf, conf, abs_tol=1e-12) and set(entries) == set(trail)
            ok = ok and all(entries[s].category is c and abs(entries[s].score - sc) <= 1e-9
                            for s, (c, sc) in trail.items())
            if not ok:
                mismatches.append((i, a))
    ok = not mismatches and elapsed < 1.0
    criterion(1, ok, f"20 fixtures, {len(mismatches)} mismatches, propagation time {elapsed:.3f}s")
    assert ok, mismatches


def test_criterion_2_tree_oracle(criterion):
    rng = random.Random(20240602)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(20):
        rows, labels = random_tree_fixture(rng, max_samples=12, max_features=3)
        tree = train_tree(np.array(rows), np.array(labels), TrainConfig(), seed=0)
        mismatches += tree_as_tuples(tree.root()) != exhaustive_tree(rows, labels, len(CATEGORIES))
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 5.0
    criterion(2, ok, f"20 fixtures, {mismatches} mismatches, {elapsed:.3f}s")
    assert ok


def test_criterion_3_metric_identities(criterion):
    rng = np.random.default_rng(20240603)
    worst = 0.0
    bad = 0
    for _ in range(100):
        m = rng.integers(0, 50, (4, 4))
        rep = metrics_from_confusion(ConfusionMatrix(m))
        bad += not (rep.micro_precision == rep.micro_recall == rep.accuracy)
        per_class, _ = confusion_metrics(m.tolist())
        for c, (p, r, _) in zip(CATEGORIES, per_class):
            hm = 2 * float(p) * float(r) / (float(p) + float(r)) if p + r else 0.0
            worst = max(worst, abs(rep.f1[c] - hm))
    ok = bad == 0 and worst <= 1e-12
    criterion(3, ok, f"100 matrices, micro identity failures {bad}, max F1 deviation {worst:.2e}")
    assert ok


def test_criterion_4_stratification(criterion):
    rng = random.Random(20240604)
    worst = 0
    for _ in range(50):
        labels = {}
        for c in CATEGORIES:
            n = rng.choice([0, rng.randint(5, 120)])
            labels.update({f"{c.value}{i}": c for i in range(n)})
        if not labels:
            labels = {f"x{i}": CATEGORIES[0] for i in range(5)}
        fa = stratified_folds(labels, 5, seed=rng.randrange(10_000))
        for per in fa.counts(labels).values():
            worst = max(worst, max(per) - min(per))
    ok = worst <= 1
    criterion(4, ok, f"50 label multisets, max per-category fold spread {worst}")
    assert ok


def test_criterion_5_synthetic_recovery(default_run, tmp_path, criterion):
    cfg, report, elapsed = default_run
    truth = report.truth
    recalls = {c: truth["per_category"][c]["recall"] for c in truth["per_category"]}
    main_ok = truth["n"] == 400 and truth["accuracy"] >= 0.80 and min(recalls.values()) >= 0.6

    # noise-free corpus: every hashed account should be propagated to its planted category
    gcfg = replace(GeneratorConfig(), noise=0.0)
    corpus = generate(gcfg, tmp_path / "clean")
    ds, _ = parse_archive(corpus.archive, "jsonl")
    res = propagate(ds, load_seed_labels(corpus.labels))
    hashed = [a for a, h in corpus.truth.hashed.items() if h]
    correct = sum(res.labels.category(a) is corpus.truth.categories[a] for a in hashed)
    ok = main_ok and correct == len(hashed) and elapsed < 120
    criterion(5, ok, f"accuracy {truth['accuracy']:.4f}, min recall {min(recalls.values()):.3f}, "
                     f"noise-free propagation {correct}/{len(hashed)}, pipeline {elapsed:.1f}s")
    assert ok


def test_criterion_6_determinism(default_run, tmp_path, criterion):
    cfg, _, _ = default_run
    # at least a few workers so the threaded path runs even on a single-core machine
    threads = max(os.cpu_count() or 1, 4)
    other = cfg.with_overrides(out=tmp_path / "run_max", threads=threads)
    run_pipeline(other)
    same = {name: (cfg.out / name).read_bytes() == (other.out / name).read_bytes()
            for name in ("model.json", "metrics.json", "metrics.md")}
    ok = all(same.values())
    criterion(6, ok, f"threads 1 vs {threads}: " + ", ".join(f"{k} {'identical' if v else 'DIFFERS'}"
                                                            for k, v in same.items()))
    assert ok


def test_criterion_7_depth_sweep(criterion):
    ids, X, labels = planted_rule_samples(seed=0)
    rows = dict(depth_sweep(ids, X, labels, TrainConfig(seed=0), range(1, 21)))
    best_depth = max(rows, key=lambda d: (rows[d], -d))
    best = rows[best_depth]
    deep = max(a for d, a in rows.items() if d >= 15)
    ok = rows[1] < best and best_depth >= 3 and deep <= best + 0.01
    criterion(7, ok, f"depth1 {rows[1]:.3f}, best depth {best_depth} at {best:.3f}, max depth>=15 {deep:.3f}")
    assert ok


REAL_CONFIG = os.environ.get("FOOTPRINT_REAL_CONFIG")
REAL_RECHECK_CONFIG = os.environ.get("FOOTPRINT_REAL_RECHECK_CONFIG")
# per-category test-set F1 targets
F1_TARGETS = {Category.FAKE_NEWS: 0.88, Category.ORGANIZATIONS: 0.81, Category.POLITICAL_AFFILIATES: 0.84,
              Category.DEFAULT_INDIVIDUALS: 0.92}


def _within(x, target, tol):
    return abs(x - target) <= tol


def test_criterion_8_real_data(tmp_path, criterion):
    if not REAL_CONFIG or not Path(REAL_CONFIG).exists():
        criterion(8, None, "real archive not available (set FOOTPRINT_REAL_CONFIG to a pipeline TOML)")
        pytest.skip("real archive not available")
    cfg = PipelineConfig.load(REAL_CONFIG, out=tmp_path / "real")
    rep = run_pipeline(cfg)
    seed = sum(v for k, v in rep.census["seed"].items() if k != "Uncategorized")
    after = sum(v for k, v in rep.census["propagated"].items() if k != "Uncategorized")
    uncat = rep.census["propagated"]["Uncategorized"]
    checks = {
        "seed labels": _within(seed, 1813, 0.02 * 1813),
        "labeled after propagation": _within(after, 2408, 0.02 * 2408),
        "uncategorized": _within(uncat, 424, 0.02 * 424),
        "accuracy": _within(rep.metrics["accuracy"], 0.88, 0.04),
    }
    for c, target in F1_TARGETS.items():
        checks[f"F1 {c.value}"] = _within(rep.holdout["per_category"][c.value]["f1"], target, 0.06)
    if rep.agreements:
        checks["news-feed agreement"] = _within(rep.agreements[0]["agreement"], 0.907, 0.03)
    if REAL_RECHECK_CONFIG and Path(REAL_RECHECK_CONFIG).exists():
        ru = run_pipeline(PipelineConfig.load(REAL_RECHECK_CONFIG, out=tmp_path / "real_ru"))
        checks["manual recheck"] = ru.recheck is not None and _within(ru.recheck["accuracy"], 0.905, 0.03)
    ok = all(checks.values())
    criterion(8, ok, ", ".join(f"{k} {'ok' if v else 'OUT OF BAND'}" for k, v in checks.items()))
    assert ok


def test_criterion_9_forest_vs_tree(default_run, criterion):
    cfg, _, _ = default_run
    ids, X, labels = Pipeline(cfg)._training_set()
    names = [f"f{j}" for j in range(X.shape[1])]
    wins = 0
    details = []
    for s in range(20):
        forest_cfg = cfg.train.with_(seed=s)
        forest = cross_validate(ids, X, labels, lambda Xt, yt: train_forest(Xt, yt, forest_cfg, names), 5, s)
        tree = cross_validate(ids, X, labels,
                              lambda Xt, yt: train_baseline("decision-tree", Xt, yt, {"seed": s}), 5, s)
        wins += forest.mean_accuracy >= tree.mean_accuracy
        details.append(forest.mean_accuracy - tree.mean_accuracy)
    ok = wins >= 18
    criterion(9, ok, f"forest >= tree in {wins}/20 seeds, mean gap {np.mean(details):+.4f}")
    assert ok
