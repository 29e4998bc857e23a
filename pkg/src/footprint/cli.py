"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from footprint import __version__
from footprint.corpus import CorpusError
from footprint.labeling import LabelingError
from footprint.pipeline import (STAGES, ConfigError, OutputLocked, Pipeline, PipelineConfig, StageError,
                                compare_classifiers, comparison_markdown, output_lock, run_pipeline)
from footprint.synthgen import GeneratorConfig, InvalidConfig, generate, verify_generation

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_STAGE = 0, 1, 2, 3
DATA_ERRORS = (ConfigError, CorpusError, LabelingError, InvalidConfig, FileNotFoundError)

log = logging.getLogger("footprint")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="pipeline or generator TOML file")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")
    common.add_argument("-v", "--verbose", action="store_true")
    stage_opts = argparse.ArgumentParser(add_help=False)
    stage_opts.add_argument("--subspan-months", type=int)
    stage_opts.add_argument("--vector-mode", choices=("counts", "binary"))
    stage_opts.add_argument("--propagation", choices=("single", "fixpoint"))
    stage_opts.add_argument("--normalize-axis", choices=("row", "column"))

    p = _Parser(prog="footprint", description="Social-footprint classification pipeline.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "ingest": "parse the configured archives",
        "label": "build seed labels from codings, description rules and footprints",
        "propagate": "categorize hashed accounts by hashtag similarity",
        "featurize": "extract, screen and normalize behavioral features",
        "train": "fit the random forest on all labeled accounts",
        "evaluate": "cross-validation, holdout and depth sweep",
        "validate": "predict uncategorized accounts and compare with external codings",
    }
    for name, text in helps.items():
        sub.add_parser(name, help=text, parents=[common, stage_opts])
    sub.add_parser("run", help="run every stage", parents=[common, stage_opts])
    sp = sub.add_parser("synth", help="generate a synthetic corpus with a ready pipeline config",
                        parents=[common])
    sp.add_argument("--noise", type=float)
    sp.add_argument("--accounts", type=int, help="accounts per category")
    sp.add_argument("--verify", action="store_true", help="also run the statistics check")
    cp = sub.add_parser("compare", help="cross-validate every classifier kind on the same folds",
                        parents=[common, stage_opts])
    cp.add_argument("--kinds", nargs="+", help="subset of classifier kinds")
    return p


def _pipeline_config(args) -> PipelineConfig:
    if args.config is None:
        raise UsageError("--config is required")
    if not args.config.exists():
        raise ConfigError(f"config file not found: {args.config}")
    return PipelineConfig.load(args.config, seed=args.seed, out=args.out, threads=args.threads,
                               subspan_months=args.subspan_months, vector_mode=args.vector_mode,
                               propagation=args.propagation, normalize_axis=args.normalize_axis)


def _run_stages(args, stages) -> int:
    cfg = _pipeline_config(args)
    report = run_pipeline(cfg, stages)
    for rec in report.stages:
        print(f"{rec.name}: " + ", ".join(f"{k}={v}" for k, v in rec.outputs.items()))
        for w in rec.warnings:
            print(f"  warning: {w}")
    if report.metrics:
        print(f"cv accuracy: {report.metrics['accuracy']:.4f}")
    if report.truth:
        print(f"accuracy against ground truth: {report.truth['accuracy']:.4f}")
    print(f"artifacts in {cfg.out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = GeneratorConfig.load(args.config) if args.config else GeneratorConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.noise is not None:
        changes["noise"] = args.noise
    if changes or args.accounts is not None:
        raw = cfg.to_json()
        raw.update(changes)
        if args.accounts is not None:
            raw["accounts_per_category"] = args.accounts
        cfg = GeneratorConfig.from_mapping(raw)
    out = args.out or Path("synthetic")
    corpus = generate(cfg, out)
    # hashed accounts are left for propagation rather than footprint seeding
    (out / "pipeline.toml").write_text(
        "\n".join([
            f"seed = {cfg.seed}",
            'out = "run"',
            "",
            "[data]",
            'archive = "archive.jsonl"',
            'schema = "jsonl"',
            'labels = "labels.csv"',
            "footprints = false",
            "",
            "[validate]",
            'reference = "reference_labels.csv"',
            'truth = "ground_truth.csv"',
            "",
        ]), encoding="utf-8")
    hashed = sum(corpus.truth.hashed.values())
    print(f"{len(corpus.truth.categories)} accounts ({hashed} hashed), {corpus.n_tweets} tweets -> {out}")
    if args.verify:
        rep = verify_generation(out, cfg)
        (out / "verification.json").write_text(json.dumps(rep.to_json(), indent=1, sort_keys=True) + "\n",
                                               encoding="utf-8")
        for c in rep.flags:
            print(f"  flagged {c.category}/{c.statistic}: expected {c.expected:.4g}, observed "
                  f"{c.observed:.4g} (z={c.z:.2f})")
        print("verification: " + ("ok" if rep.ok else f"{len(rep.flags)} flags"))
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _pipeline_config(args)
    cfg.check_paths()
    pipe = Pipeline(cfg)
    with output_lock(pipe.out):
        if not (pipe.out / "features.csv").exists():
            for name in ("ingest", "label", "propagate", "featurize"):
                pipe.run_stage(name)
        ids, X, lab = pipe._training_set()
        kinds = tuple(args.kinds) if args.kinds else cfg.compare_kinds
        rows = compare_classifiers(ids, X, lab, kinds, cfg.train, cfg.k, cfg.seed, cfg.threads)
    table = comparison_markdown(rows)
    (pipe.out / "comparison.md").write_text(table, encoding="utf-8")
    (pipe.out / "comparison.json").write_text(
        json.dumps([r.__dict__ for r in rows], indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(table, end="")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", None) is not None and args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        if args.command == "synth":
            return cmd_synth(args)
        if args.command == "compare":
            return cmd_compare(args)
        if args.command == "run":
            return _run_stages(args, STAGES)
        if args.command == "validate":
            return _run_stages(args, ("predict", "validate"))
        return _run_stages(args, (args.command,))
    except UsageError as exc:
        parser.error(str(exc))
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA if isinstance(exc.cause, DATA_ERRORS) else EXIT_STAGE
    except OutputLocked as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
