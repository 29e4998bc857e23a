"""Stage orchestration: ingest, label, propagate, featurize, train, evaluate,
predict and validate, each writing its artifact into one output directory.

Every stage can be run on its own; it reads what the earlier stages left on
disk. Reports are deterministic for a given config; wall-clock data goes to
``run_metadata.json`` only.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from footprint.categories import CATEGORIES, Category
from footprint.classifiers import (BASELINE_KINDS, ForestModel, TrainConfig, train_baseline,
                                   train_forest)
from footprint.corpus import (SCHEMAS, IngestSummary, load_dataset, merge_datasets, parse_archive,
                             parse_timestamp, save_dataset)
from footprint.evaluation import (cross_dataset_agreement, cross_validate, depth_sweep, evaluate,
                                  holdout_evaluate, manual_recheck_accuracy, write_depth_sweep_csv)
from footprint.features import (FeatureCatalog, FeatureMatrix, feature_matrix, pearson_matrix,
                                select_features)
from footprint.labeling import (SeedLabelSet, load_footprint_table, load_rules, load_seed_labels,
                                seed_labels)
from footprint.propagation import propagate

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger(__name__)

STAGES = ("ingest", "label", "propagate", "featurize", "train", "evaluate", "predict", "validate")


class ConfigError(ValueError):
    """Invalid or incomplete pipeline configuration."""


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


class OutputLocked(RuntimeError):
    pass


@dataclass(frozen=True)
class DatasetSpec:
    path: Path
    schema: str = "jsonl"
    language: str | None = None
    start: datetime | None = None
    end: datetime | None = None


@dataclass(frozen=True)
class PipelineConfig:
    datasets: tuple[DatasetSpec, ...]
    labels: Path
    out: Path = Path("run")
    rules: Path | None = None
    use_rules: bool = True
    footprints: Path | None = None
    use_footprints: bool = True
    min_footprint_hits: int = 2
    subspan_months: int = 6
    propagation: str = "single"
    vector_mode: str = "counts"
    features: tuple[str, ...] = FeatureCatalog().names
    target_count: int = 8
    normalize_axis: str = "row"
    train: TrainConfig = TrainConfig()
    k: int = 5
    holdout_fraction: float = 0.3
    depths: tuple[int, ...] = tuple(range(1, 21))
    seed: int = 0
    threads: int = 1
    reference: Path | None = None
    reference_pairs: tuple[tuple[str, str], ...] = ((Category.FAKE_NEWS.value, "NewsFeed"),)
    agreement_denominator: str = "reference-category-size"
    recheck: Path | None = None
    truth: Path | None = None
    compare_kinds: tuple[str, ...] = ("forest",) + BASELINE_KINDS + ("svm",)

    def check_paths(self) -> None:
        missing = [str(p) for p in (*(d.path for d in self.datasets), self.labels, self.rules,
                                    self.footprints, self.reference, self.recheck, self.truth)
                   if p is not None and not Path(p).exists()]
        if missing:
            raise ConfigError(f"missing input files: {', '.join(missing)}")

    def to_json(self) -> dict:
        def conv(v):
            if isinstance(v, Path):
                return str(v)
            if isinstance(v, datetime):
                return v.isoformat()
            if isinstance(v, (tuple, list)):
                return [conv(x) for x in v]
            if isinstance(v, dict):
                return {k: conv(x) for k, x in v.items()}
            return v
        return conv(asdict(self))

    @classmethod
    def from_mapping(cls, obj: Mapping[str, Any], base_dir: str | os.PathLike = ".") -> PipelineConfig:
        """Build from a TOML-shaped mapping; relative paths resolve against ``base_dir``."""
        base = Path(base_dir)

        def path(v):
            if v is None or v is False:
                return None
            p = Path(v)
            return p if p.is_absolute() else base / p

        data = obj.get("data", {})
        raw_sets = data.get("datasets")
        if raw_sets is None and "archive" in data:
            raw_sets = [{"path": data["archive"], "schema": data.get("schema", "jsonl"),
                         "language": data.get("language")}]
        if not raw_sets:
            raise ConfigError("config needs [data] archive or [[data.datasets]]")
        sets = []
        for d in raw_sets:
            if "path" not in d:
                raise ConfigError("dataset entry without path")
            sets.append(DatasetSpec(path(d["path"]), d.get("schema", "jsonl"), d.get("language"),
                                    _ts(d.get("start")), _ts(d.get("end"))))
        if "labels" not in data:
            raise ConfigError("config needs [data] labels")
        prop = obj.get("propagation", {})
        feat = obj.get("features", {})
        tr = obj.get("train", {})
        ev = obj.get("evaluate", {})
        val = obj.get("validate", {})
        seed = int(obj.get("seed", 0))
        known_train = {f for f in TrainConfig.__dataclass_fields__}
        bad = set(tr) - known_train - {"k"}
        if bad:
            raise ConfigError(f"unknown [train] keys: {sorted(bad)}")
        try:
            train = TrainConfig(**{k: v for k, v in tr.items() if k in known_train and k != "seed"}, seed=seed)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[train]: {exc}") from exc
        rules = data.get("rules")
        fps = data.get("footprints")
        pairs = val.get("pairs", {Category.FAKE_NEWS.value: "NewsFeed"})
        cfg = cls(
            datasets=tuple(sets),
            labels=path(data["labels"]),
            out=path(obj.get("out", "run")),
            rules=path(rules) if isinstance(rules, str) else None,
            use_rules=rules is not False,
            footprints=path(fps) if isinstance(fps, str) else None,
            use_footprints=fps is not False,
            min_footprint_hits=int(data.get("min_footprint_hits", 2)),
            subspan_months=int(prop.get("subspan_months", 6)),
            propagation=prop.get("mode", "single"),
            vector_mode=prop.get("vector_mode", "counts"),
            features=tuple(feat.get("names", FeatureCatalog().names)),
            target_count=int(feat.get("target_count", 8)),
            normalize_axis=feat.get("normalize_axis", "row"),
            train=train,
            k=int(tr.get("k", ev.get("k", 5))),
            holdout_fraction=float(ev.get("holdout_fraction", 0.3)),
            depths=tuple(ev.get("depths", range(1, 21))),
            seed=seed,
            threads=int(obj.get("threads", 1)),
            reference=path(val.get("reference")),
            reference_pairs=tuple(sorted((str(Category.parse(a).value), str(b)) for a, b in pairs.items())),
            agreement_denominator=val.get("denominator", "reference-category-size"),
            recheck=path(val.get("recheck")),
            truth=path(val.get("truth")),
            compare_kinds=tuple(obj.get("compare", {}).get("kinds", cls.compare_kinds)),
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        for d in self.datasets:
            if d.schema not in SCHEMAS:
                raise ConfigError(f"{d.path}: unknown schema {d.schema!r}; expected one of {SCHEMAS}")
        if self.propagation not in ("single", "fixpoint"):
            raise ConfigError(f"propagation mode must be single or fixpoint, got {self.propagation!r}")
        if self.vector_mode not in ("counts", "binary"):
            raise ConfigError(f"vector mode must be counts or binary, got {self.vector_mode!r}")
        if self.normalize_axis not in ("row", "column"):
            raise ConfigError(f"normalize axis must be row or column, got {self.normalize_axis!r}")
        if self.subspan_months < 1:
            raise ConfigError("subspan width must be >= 1 month")
        if self.k < 2:
            raise ConfigError("k must be >= 2")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        try:
            FeatureCatalog(self.features)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.target_count > len(self.features):
            raise ConfigError(f"target_count {self.target_count} exceeds {len(self.features)} candidates")

    @classmethod
    def load(cls, path: str | os.PathLike, **overrides) -> PipelineConfig:
        p = Path(path)
        try:
            with open(p, "rb") as fh:
                obj = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{p}: {exc}") from exc
        return cls.from_mapping(obj, p.parent).with_overrides(**overrides)

    def with_overrides(self, seed: int | None = None, out=None, threads: int | None = None,
                       **kw) -> PipelineConfig:
        changes = {k: v for k, v in kw.items() if v is not None}
        if seed is not None:
            changes["seed"] = seed
            changes["train"] = self.train.with_(seed=seed)
        if out is not None:
            changes["out"] = Path(out)
        if threads is not None:
            changes["threads"] = threads
        cfg = replace(self, **changes) if changes else self
        cfg.validate()
        return cfg


def _ts(v):
    if v is None:
        return None
    return parse_timestamp(v) if isinstance(v, str) else parse_timestamp(v.isoformat())


# -- artifacts --------------------------------------------------------------

def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def _load(path: Path):
    return json.loads(path.read_text(encoding="utf-8"))


def write_predictions_csv(preds: Mapping[str, Category], path: Path, source: Mapping[str, str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["account_id", "category", "source"])
        for a in sorted(preds):
            w.writerow([a, preds[a].value, source.get(a, "")])


def read_category_csv(path: str | os.PathLike, column: str = "category") -> dict[str, str]:
    with open(path, encoding="utf-8", newline="") as fh:
        return {r["account_id"]: r[column] for r in csv.DictReader(fh)}


@dataclass
class StageRecord:
    name: str
    inputs: dict[str, int] = field(default_factory=dict)
    outputs: dict[str, int] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


@dataclass
class RunReport:
    stages: list[StageRecord] = field(default_factory=list)
    census: dict[str, dict[str, int]] = field(default_factory=dict)
    metrics: dict | None = None
    holdout: dict | None = None
    agreements: list[dict] = field(default_factory=list)
    recheck: dict | None = None
    truth: dict | None = None

    def stage(self, name: str) -> StageRecord | None:
        return next((s for s in self.stages if s.name == name), None)

    def to_json(self) -> dict:
        return {"stages": [asdict(s) for s in self.stages], "census": self.census,
                "metrics": self.metrics, "holdout": self.holdout, "agreements": self.agreements,
                "recheck": self.recheck, "truth": self.truth}

    def to_markdown(self) -> str:
        lines = ["# Run report", "", "## Stages", "", "| stage | inputs | outputs | warnings |",
                 "|---|---|---|---|"]
        for s in self.stages:
            fmt = lambda d: ", ".join(f"{k}={v}" for k, v in d.items())
            lines.append(f"| {s.name} | {fmt(s.inputs)} | {fmt(s.outputs)} | {len(s.warnings)} |")
        if self.census:
            lines += ["", "## Label census", "", "| category | " + " | ".join(self.census) + " |",
                      "|---|" + "---|" * len(self.census)]
            for c in [*CATEGORIES, Category.UNCATEGORIZED]:
                lines.append(f"| {c.value} | " + " | ".join(str(v.get(c.value, 0)) for v in self.census.values())
                             + " |")
        if self.metrics:
            lines += ["", _metrics_md("Cross-validation", self.metrics)]
        if self.holdout:
            lines += ["", _metrics_md("Holdout", self.holdout)]
        for a in self.agreements:
            lines += ["", f"Agreement with {a['reference']}: {a['matched']}/{a['reference_size']} = "
                          f"{a['agreement']:.3f} ({a['denominator']})"]
        if self.recheck:
            lines += ["", f"Recheck accuracy: {self.recheck['correct']}/{self.recheck['covered']} = "
                          f"{self.recheck['accuracy']:.3f}"]
        if self.truth:
            lines += ["", _metrics_md("Against planted ground truth", self.truth)]
        return "\n".join(lines) + "\n"


def _metrics_md(title: str, m: dict) -> str:
    lines = [f"### {title}", "", "| category | precision | recall | F1 | support |", "|---|---|---|---|---|"]
    for c, r in m["per_category"].items():
        lines.append(f"| {c} | {r['precision']:.3f} | {r['recall']:.3f} | {r['f1']:.3f} | {r['support']} |")
    lines.append(f"| accuracy | | | {m['accuracy']:.3f} | {m['n']} |")
    return "\n".join(lines)


# -- the pipeline -----------------------------------------------------------

@contextmanager
def output_lock(out: Path):
    out.mkdir(parents=True, exist_ok=True)
    lock = out / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise OutputLocked(f"{out} is in use by another run (remove {lock} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


class Pipeline:
    """Runs stages against one output directory; state is reloaded from disk
    when a stage runs without its predecessors in the same process."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.out = Path(config.out)
        self.report = RunReport()
        self.durations: dict[str, float] = {}
        self._dataset = None
        self._seeds: SeedLabelSet | None = None
        self._labels: SeedLabelSet | None = None
        self._fm: FeatureMatrix | None = None
        self._model: ForestModel | None = None
        self._predictions: dict[str, Category] | None = None

    # state loaders
    @property
    def dataset(self):
        if self._dataset is None:
            self._dataset = load_dataset(self.out / "dataset")
        return self._dataset

    @property
    def seeds(self) -> SeedLabelSet:
        if self._seeds is None:
            self._seeds = SeedLabelSet.read_csv(self.out / "seed_labels.csv")
        return self._seeds

    @property
    def labels(self) -> SeedLabelSet:
        if self._labels is None:
            self._labels = SeedLabelSet.read_csv(self.out / "labels.csv")
        return self._labels

    @property
    def features(self) -> FeatureMatrix:
        if self._fm is None:
            self._fm = FeatureMatrix.from_csv(self.out / "features.csv")
        return self._fm

    @property
    def model(self) -> ForestModel:
        if self._model is None:
            self._model = ForestModel.load(self.out / "model.json")
        return self._model

    @property
    def predictions(self) -> dict[str, Category]:
        if self._predictions is None:
            self._predictions = {a: Category.parse(c)
                                 for a, c in read_category_csv(self.out / "predictions.csv").items()}
        return self._predictions

    def run_stage(self, name: str) -> StageRecord:
        if name not in STAGES:
            raise ValueError(f"unknown stage {name!r}")
        self.out.mkdir(parents=True, exist_ok=True)
        rec = StageRecord(name)
        t0 = time.perf_counter()
        try:
            getattr(self, f"_stage_{name}")(rec)
        except Exception as exc:
            raise StageError(name, exc) from exc
        self.durations[name] = time.perf_counter() - t0
        self.report.stages.append(rec)
        return rec

    def _stage_ingest(self, rec: StageRecord) -> None:
        cfg = self.config
        parts, total = [], IngestSummary()
        for spec in cfg.datasets:
            tf = (spec.start, spec.end) if spec.start and spec.end else None
            part, summary = parse_archive(spec.path, spec.schema, language_filter=spec.language,
                                          timeframe=tf)
            total = total.merge(summary)
            parts.append(part)
        ds = merge_datasets(parts)
        save_dataset(ds, self.out / "dataset")
        _dump(total.to_json(), self.out / "ingest_summary.json")
        self._dataset = ds
        rec.inputs = {"rows_read": total.rows_read}
        rec.outputs = {"rows": total.rows_accepted, "accounts": len(ds.accounts),
                       "hashed_accounts": sum(p.is_hashed for p in ds.accounts.values())}
        if total.rows_rejected:
            rec.warnings.append(f"{total.rows_rejected} rows rejected: {dict(sorted(total.reject_reasons.items()))}")
        if total.retweet_heuristic_rows:
            rec.warnings.append(f"{total.retweet_heuristic_rows} rows used the retweet text heuristic")

    def _stage_label(self, rec: StageRecord) -> None:
        cfg = self.config
        coded = load_seed_labels(cfg.labels)
        rules = load_rules(cfg.rules) if cfg.use_rules else None
        fps = load_footprint_table(cfg.footprints) if cfg.use_footprints else None
        seeds = seed_labels(self.dataset, coded, rules, fps, cfg.min_footprint_hits)
        seeds.write_csv(self.out / "seed_labels.csv")
        n_acc = len(self.dataset.accounts)
        census = seeds.census()
        census[Category.UNCATEGORIZED.value] = n_acc - len(seeds)
        _dump({"census": census, "by_provenance": seeds.by_provenance(),
               "rejected": [list(r) if isinstance(r, tuple) else r for r in seeds.rejected]},
              self.out / "label_report.json")
        self._seeds = seeds
        self.report.census["seed"] = census
        rec.inputs = {"accounts": n_acc, "coded": len(coded)}
        rec.outputs = {"labeled": len(seeds), "uncategorized": n_acc - len(seeds)}
        outside = len(coded) - sum(a in self.dataset.accounts for a in coded.labels)
        if outside:
            rec.warnings.append(f"{outside} coded accounts not present in the archive")
        if seeds.rejected:
            rec.warnings.append(f"{len(seeds.rejected)} coded rows rejected")

    def _stage_propagate(self, rec: StageRecord) -> None:
        cfg = self.config
        before = self.seeds
        res = propagate(self.dataset, before, cfg.subspan_months, cfg.propagation,
                        binary=cfg.vector_mode == "binary", threads=cfg.threads)
        after = res.labels
        # reconciliation is part of the contract, not just a report line
        if len(before) + res.propagated != len(after):
            raise AssertionError(f"label counts do not reconcile: {len(before)} + {res.propagated} "
                                 f"!= {len(after)}")
        after.write_csv(self.out / "labels.csv")
        _dump(res.report(), self.out / "propagation.json")
        self._labels = after
        n_acc = len(self.dataset.accounts)
        census = after.census()
        census[Category.UNCATEGORIZED.value] = n_acc - len(after)
        self.report.census["propagated"] = census
        rec.inputs = {"labeled": len(before), "targets": len(res.targets)}
        rec.outputs = {"propagated": res.propagated, "labeled": len(after),
                       "uncategorized": n_acc - len(after)}
        if res.skipped_subspans:
            rec.warnings.append(f"subspans without labeled activity: {res.skipped_subspans}")

    def _stage_featurize(self, rec: StageRecord) -> None:
        cfg = self.config
        lab = self.labels.categories()
        raw = feature_matrix(self.dataset, FeatureCatalog(cfg.features), lab)
        raw.to_csv(self.out / "features_raw.csv")
        train_rows = [i for i, a in enumerate(raw.account_ids) if a in lab]
        corr = pearson_matrix(raw.X[train_rows], list(raw.feature_names))
        keep = select_features(corr, cfg.target_count)
        fm = raw.columns(keep).normalized(cfg.normalize_axis)
        fm.to_csv(self.out / "features.csv")
        _dump({**corr.to_json(), "selected": keep, "normalize_axis": cfg.normalize_axis},
              self.out / "feature_selection.json")
        self._fm = fm
        degenerate = int(fm.degenerate_mask().sum())
        rec.inputs = {"accounts": len(raw.account_ids), "candidates": len(cfg.features)}
        rec.outputs = {"features": len(keep), "degenerate_rows": degenerate}
        if degenerate:
            rec.warnings.append(f"{degenerate} all-zero feature rows excluded from training")

    def _training_set(self):
        fm = self.features
        lab = fm.labels
        deg = fm.degenerate_mask()
        ids = [a for a, d in zip(fm.account_ids, deg) if a in lab and not d]
        return ids, fm.rows(ids), lab

    def _stage_train(self, rec: StageRecord) -> None:
        cfg = self.config
        ids, X, lab = self._training_set()
        y = np.array([lab[a].index for a in ids], dtype=np.int64)
        model = train_forest(X, y, cfg.train, self.features.feature_names, threads=cfg.threads)
        model.save(self.out / "model.json")
        self._model = model
        rec.inputs = {"training_accounts": len(ids)}
        rec.outputs = {"trees": len(model.trees)}

    def _stage_evaluate(self, rec: StageRecord) -> None:
        cfg = self.config
        ids, X, lab = self._training_set()
        names = self.features.feature_names
        trainer = lambda Xt, yt: train_forest(Xt, yt, cfg.train, names, threads=cfg.threads)
        cv = cross_validate(ids, X, lab, trainer, cfg.k, cfg.seed)
        _dump(cv.to_json(), self.out / "metrics.json")
        (self.out / "metrics.md").write_text(cv.report.to_markdown("Cross-validation"), encoding="utf-8")
        _, _, _, _, hold = holdout_evaluate(ids, X, lab, trainer, cfg.holdout_fraction, cfg.seed)
        _dump(hold.to_json(), self.out / "holdout.json")
        sweep = depth_sweep(ids, X, lab, cfg.train, cfg.depths, cfg.holdout_fraction)
        write_depth_sweep_csv(sweep, self.out / "depth_sweep.csv")
        write_predictions_csv(cv.predictions, self.out / "cv_predictions.csv", {})
        self.report.metrics = cv.to_json()
        self.report.holdout = hold.to_json()
        rec.inputs = {"accounts": len(ids), "k": cfg.k}
        rec.outputs = {"cv_predictions": len(cv.predictions), "depths": len(sweep)}

    def _stage_predict(self, rec: StageRecord) -> None:
        fm = self.features
        lab = self.labels.categories()
        model = self.model
        targets = [a for a in fm.account_ids if a not in lab]
        preds: dict[str, Category] = dict(lab)
        source = {a: p.value for a, (_, p) in self.labels.labels.items()}
        if targets:
            for p in model.predictions(targets, fm.rows(targets)):
                preds[p.account_id] = p.category
                source[p.account_id] = "model"
        write_predictions_csv(preds, self.out / "predictions.csv", source)
        self._predictions = preds
        census = {c.value: 0 for c in CATEGORIES}
        for c in preds.values():
            census[c.value] += 1
        census[Category.UNCATEGORIZED.value] = 0
        self.report.census["final"] = census
        rec.inputs = {"uncategorized": len(targets)}
        rec.outputs = {"predicted": len(targets), "total": len(preds)}

    def _stage_validate(self, rec: StageRecord) -> None:
        cfg = self.config
        preds = self.predictions
        results: dict[str, Any] = {}
        if cfg.reference is not None:
            ref = read_category_csv(cfg.reference)
            ag = cross_dataset_agreement(preds, ref, list(cfg.reference_pairs), cfg.agreement_denominator,
                                         cfg.reference.stem)
            self.report.agreements.append(ag.to_json())
            results["agreement"] = ag.to_json()
            rec.outputs["agreement_matched"] = ag.matched
        if cfg.recheck is not None:
            coded = {a: Category.parse(c) for a, c in read_category_csv(cfg.recheck).items()}
            rr = manual_recheck_accuracy(preds, coded)
            self.report.recheck = rr.to_json()
            results["recheck"] = rr.to_json()
            rec.outputs["recheck_covered"] = rr.covered
        if cfg.truth is not None:
            truth = {a: Category.parse(c) for a, c in read_category_csv(cfg.truth).items()}
            # held-out view: out-of-fold predictions for trained accounts, model output otherwise
            cv_path = self.out / "cv_predictions.csv"
            view = dict(preds)
            if cv_path.exists():
                view.update({a: Category.parse(c) for a, c in read_category_csv(cv_path).items()})
            common = {a: truth[a] for a in truth if a in view}
            _, rep = evaluate(common, {a: view[a] for a in common})
            self.report.truth = rep.to_json()
            results["truth"] = rep.to_json()
            rec.outputs["truth_accounts"] = rep.n
        _dump(results, self.out / "validation.json")
        if not results:
            rec.warnings.append("no reference, recheck or truth file configured")

    def write_reports(self, started: datetime) -> None:
        _dump(self.report.to_json(), self.out / "report.json")
        (self.out / "report.md").write_text(self.report.to_markdown(), encoding="utf-8")
        _dump({"started": started.isoformat(), "finished": datetime.now(timezone.utc).isoformat(),
               "durations_s": self.durations, "config": self.config.to_json()},
              self.out / "run_metadata.json")


def run_pipeline(config: PipelineConfig, stages: tuple[str, ...] = STAGES) -> RunReport:
    """Run ``stages`` in order inside a locked output directory."""
    config.check_paths()
    started = datetime.now(timezone.utc)
    pipe = Pipeline(config)
    with output_lock(pipe.out):
        try:
            for name in STAGES:
                if name in stages:
                    log.info("stage %s", name)
                    pipe.run_stage(name)
        finally:
            pipe.write_reports(started)
    return pipe.report


# -- classifier comparison --------------------------------------------------

@dataclass
class ComparisonRow:
    kind: str
    mean_accuracy: float | None
    std_accuracy: float | None
    status: str = "ok"


def compare_classifiers(account_ids, X, labels: Mapping[str, Category], kinds=("forest",) + BASELINE_KINDS,
                        train: TrainConfig = TrainConfig(), k: int = 5, seed: int = 0,
                        threads: int = 1) -> list[ComparisonRow]:
    """Same folds for every kind; rows sorted by mean accuracy (unsupported kinds last)."""
    rows = []
    names = [f"f{j}" for j in range(np.asarray(X).shape[1])]
    for kind in kinds:
        if kind == "forest":
            trainer = lambda Xt, yt: train_forest(Xt, yt, train, names, threads=threads)
        elif kind in BASELINE_KINDS:
            trainer = (lambda kd: lambda Xt, yt: train_baseline(kd, Xt, yt, {"seed": seed},
                                                                feature_names=names))(kind)
        else:
            rows.append(ComparisonRow(kind, None, None, "not implemented"))
            continue
        cv = cross_validate(account_ids, X, labels, trainer, k, seed)
        rows.append(ComparisonRow(kind, cv.mean_accuracy, cv.std_accuracy))
    rows.sort(key=lambda r: (r.mean_accuracy is None, -(r.mean_accuracy or 0.0)))
    return rows


def comparison_markdown(rows: list[ComparisonRow]) -> str:
    lines = ["| classifier | mean accuracy | std |", "|---|---|---|"]
    for r in rows:
        if r.mean_accuracy is None:
            lines.append(f"| {r.kind} | {r.status} | |")
        else:
            lines.append(f"| {r.kind} | {r.mean_accuracy:.4f} | {r.std_accuracy:.4f} |")
    return "\n".join(lines) + "\n"
