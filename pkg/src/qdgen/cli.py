"""Command-line entry points: generate, filter, analyze, make-sim-seed.

Exit codes: 0 success, 2 usage/config problems, 3 backend failures (the
run state is resumable), 4 data problems such as a budget exceeding the
pool.
"""

from __future__ import annotations

import argparse
import csv
import sys
from fractions import Fraction
from pathlib import Path

from . import analysis, filters
from .archive import Archive
from .config import build_gateway, load_config, load_seed_samples
from .engine import GenerationEngine, RunStore
from .errors import ConfigError, DataError, GatewayError, QdgenError
from .gateway.sim import make_seed_records
from .persist import read_json, sha256_file, write_json, write_jsonl
from .scoring import QualityConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_DATA = 4


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _fraction_in_unit(text: str) -> Fraction:
    value = _fraction(text)
    if not (0 <= value <= 1):
        raise argparse.ArgumentTypeError("must be in [0, 1]")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdgen",
        description="Generate, score, and filter synthetic problem-solution pairs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="run the data-generation phase")
    gen.add_argument("--config", required=True, help="TOML run configuration")
    gen.add_argument("--rounds", type=_positive_int, help="override [run].rounds")
    gen.add_argument("--out-dir", help="override [run].out_dir")
    gen.add_argument("--resume", action="store_true", help="continue from the checkpoint")

    flt = sub.add_parser("filter", help="build a budgeted training dataset from an archive")
    flt.add_argument("--archive", required=True, help="run directory or archive.jsonl path")
    flt.add_argument(
        "--strategy",
        required=True,
        choices=("quality", "diversity", "qd", "random"),
    )
    flt.add_argument("--budget", required=True, type=_positive_int)
    flt.add_argument("--mean", type=_fraction_in_unit, help="target mean quality (quality strategy)")
    flt.add_argument("--sd", type=_fraction, default=Fraction(1, 10), help="gaussian sd (quality strategy)")
    flt.add_argument("--pairs", choices=("all", "unique"), default="unique",
                     help="pool: all successful rollouts or one per problem")
    flt.add_argument("--easy-keep", type=_fraction_in_unit,
                     help="keep fraction of pairs per easy problem")
    flt.add_argument("--easy-threshold", type=_fraction_in_unit, default=Fraction(1, 2),
                     help="solve-rate at or above which a problem is easy")
    flt.add_argument("--seed", type=int, default=0)
    flt.add_argument("--plain", action="store_true", help="export only problem/solution fields")
    flt.add_argument("--out", required=True, help="output dataset JSONL path")

    ana = sub.add_parser("analyze", help="emit CSV reports from an archive")
    ana.add_argument("--archive", required=True, help="run directory or archive.jsonl path")
    ana.add_argument("--report", required=True,
                     choices=("coverage", "histogram", "validity", "perturbation"))
    ana.add_argument("--out", required=True, help="output CSV path")
    ana.add_argument("--config", help="run config (needed for validity/perturbation backends)")
    ana.add_argument("--stride", type=_positive_int, default=100, help="coverage sampling stride")
    ana.add_argument("--bins", type=_positive_int, default=10, help="validity solve-rate bins")
    ana.add_argument("--count", type=_positive_int, default=100,
                     help="samples to label / parents to perturb")
    ana.add_argument("--n", type=_positive_int, default=16, help="children per parent (perturbation)")
    ana.add_argument("--votes", type=_positive_int, default=1, help="oracle votes per sample (validity)")
    ana.add_argument("--min-solve-rate", type=_fraction_in_unit,
                     help="only analyze samples with solve-rate >= this")
    ana.add_argument("--max-solve-rate", type=_fraction_in_unit,
                     help="only analyze samples with solve-rate <= this")
    ana.add_argument("--seed", type=int, default=0)

    seed_cmd = sub.add_parser("make-sim-seed", help="synthesize a simulated seed dataset")
    seed_cmd.add_argument("--count", type=_positive_int, default=32)
    seed_cmd.add_argument("--seed", type=int, default=0)
    seed_cmd.add_argument("--label-pool", type=_positive_int, default=24,
                          help="how many simulator skill labels seeds draw from")
    seed_cmd.add_argument("--difficulty-low", type=float, default=0.15)
    seed_cmd.add_argument("--difficulty-high", type=float, default=0.85)
    seed_cmd.add_argument("--out", required=True)

    return parser


# -- command implementations -------------------------------------------------


def cmd_generate(args) -> int:
    cfg = load_config(args.config)
    if args.rounds is not None:
        from dataclasses import replace

        cfg.engine = replace(cfg.engine, rounds=args.rounds)
    out_dir = Path(args.out_dir) if args.out_dir else cfg.out_dir
    if out_dir is None:
        raise ConfigError("no output directory: set [run].out_dir or pass --out-dir")
    gateway = build_gateway(cfg)
    store = RunStore(out_dir)
    engine = GenerationEngine(cfg.engine, gateway, store)
    if args.resume:
        engine.resume()
    else:
        if cfg.seed_dataset is None:
            raise ConfigError("no seed dataset: set [run].seed_dataset")
        engine.start(load_seed_samples(cfg.seed_dataset))
    archive = engine.run()
    counters = archive.counters()
    print(f"archive: {store.archive_path} ({len(archive)} records)")
    print(
        "rounds={rounds} mutations={m} parse_failures={p} quality_positive={q}".format(
            rounds=engine.rounds_completed,
            m=counters["mutations_scored"] + counters["mutations_unusable"],
            p=counters["parse_failures"],
            q=counters["quality_positive"],
        )
    )
    return EXIT_OK


def _resolve_archive(path_text: str) -> tuple:
    """Locate archive.jsonl and its manifest from a dir or file path."""
    path = Path(path_text)
    if path.is_dir():
        archive_path = path / "archive.jsonl"
        manifest_path = path / "manifest.json"
    else:
        archive_path = path
        manifest_path = path.parent / "manifest.json"
    if not archive_path.exists():
        raise DataError(f"archive not found: {archive_path}")
    if not manifest_path.exists():
        raise DataError(f"manifest not found next to the archive: {manifest_path}")
    manifest = read_json(manifest_path)
    quality = manifest.get("quality", {})
    quality_cfg = QualityConfig.create(
        lower=quality.get("lower", "0.1"),
        upper=quality.get("upper", "0.9"),
        k_rollouts=quality.get("k_rollouts", 16),
    )
    return archive_path, quality_cfg


def cmd_filter(args) -> int:
    archive_path, quality_cfg = _resolve_archive(args.archive)
    archive = Archive.load(archive_path, quality_cfg)

    if args.pairs == "all":
        pool = filters.build_training_pairs(archive)
    else:
        pool = filters.build_unique_pool(archive)
    if args.easy_keep is not None:
        pool = filters.downsample_easy(
            pool,
            easy_threshold=args.easy_threshold,
            keep_fraction=args.easy_keep,
            seed=args.seed,
        )

    strategy = "quality_gaussian" if args.strategy == "quality" else args.strategy
    if strategy == "quality_gaussian" and args.mean is None:
        raise ConfigError("--mean is required for the quality strategy")
    spec = filters.FilterSpec.create(
        strategy=strategy, budget=args.budget, seed=args.seed,
        mean=args.mean, sd=args.sd,
    )
    subset = filters.filter_subset(pool, spec)
    fragment = filters.write_dataset(subset, args.out, plain=args.plain)
    manifest_path = Path(args.out).with_suffix(Path(args.out).suffix + ".manifest.json")
    write_json(
        manifest_path,
        {
            "archive": str(archive_path),
            "archive_sha256": sha256_file(archive_path),
            "pool_hash": filters.pool_hash(pool),
            "pool_size": len(pool),
            "spec": {
                "strategy": strategy,
                "budget": args.budget,
                "seed": args.seed,
                "mean": None if args.mean is None else str(args.mean),
                "sd": str(args.sd),
                "pairs": args.pairs,
                "easy_keep": None if args.easy_keep is None else str(args.easy_keep),
                "easy_threshold": str(args.easy_threshold),
            },
            "output": fragment,
        },
    )
    print(f"dataset: {fragment['path']} ({fragment['pairs']} pairs)")
    print(f"manifest: {manifest_path}")
    return EXIT_OK


def _write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def _windowed(records, args):
    if args.min_solve_rate is None and args.max_solve_rate is None:
        return records
    low = args.min_solve_rate if args.min_solve_rate is not None else Fraction(0)
    high = args.max_solve_rate if args.max_solve_rate is not None else Fraction(1)
    return analysis.with_solve_rate_between(records, low, high)


def cmd_analyze(args) -> int:
    archive_path, quality_cfg = _resolve_archive(args.archive)

    if args.report == "coverage":
        rows = analysis.coverage_curve(archive_path, stride=args.stride)
        _write_csv(
            args.out,
            ("generated", "archive_skill_sets", "train_skill_sets",
             "archive_unique_skills", "train_unique_skills"),
            rows,
        )
    elif args.report == "histogram":
        archive = Archive.load(archive_path, quality_cfg)
        rows = analysis.solve_rate_histogram(archive)
        _write_csv(args.out, ("solve_rate", "count"), rows)
    elif args.report == "validity":
        if not args.config:
            raise ConfigError("--config with an oracle backend is required for validity reports")
        gateway = build_gateway(load_config(args.config))
        archive = Archive.load(archive_path, quality_cfg)
        candidates = _windowed(analysis.viable_records(archive), args)
        count = min(args.count, len(candidates))
        if count == 0:
            raise DataError("no viable samples to label")
        chosen = analysis.sample_for_labeling(candidates, count, args.seed)
        labels = analysis.label_validity(gateway, chosen, args.seed, votes=args.votes)
        rows = analysis.validity_by_solve_rate(labels, archive, bins=args.bins)
        _write_csv(
            args.out,
            ("bin_low", "bin_high", "mean_validity", "count"),
            [(lo, hi, "" if mean is None else mean, n) for lo, hi, mean, n in rows],
        )
    else:  # perturbation
        if not args.config:
            raise ConfigError("--config with generation backends is required for perturbation reports")
        gateway = build_gateway(load_config(args.config))
        archive = Archive.load(archive_path, quality_cfg)
        candidates = _windowed(analysis.viable_records(archive), args)
        count = min(args.count, len(candidates))
        if count == 0:
            raise DataError("no viable parents to perturb")
        parents = analysis.sample_for_labeling(candidates, count, args.seed)
        rows = []
        for parent in parents:
            report = analysis.perturbative_report(
                gateway, quality_cfg, parent, args.n, args.seed
            )
            rows.append(
                (
                    report.parent_id,
                    float(report.parent_quality),
                    report.n_children,
                    float(report.mean_diff),
                    float(report.child_failure_rate),
                )
            )
        _write_csv(
            args.out,
            ("parent_id", "parent_quality", "n_children", "mean_diff", "child_failure_rate"),
            rows,
        )
    manifest_path = Path(args.out).with_suffix(Path(args.out).suffix + ".manifest.json")
    write_json(
        manifest_path,
        {
            "report": args.report,
            "archive": str(archive_path),
            "archive_sha256": sha256_file(archive_path),
            "params": {
                "stride": args.stride,
                "bins": args.bins,
                "count": args.count,
                "n": args.n,
                "votes": args.votes,
                "seed": args.seed,
                "min_solve_rate": None if args.min_solve_rate is None else str(args.min_solve_rate),
                "max_solve_rate": None if args.max_solve_rate is None else str(args.max_solve_rate),
            },
            "output": {"path": str(args.out), "sha256": sha256_file(args.out)},
        },
    )
    print(f"report: {args.out}")
    return EXIT_OK


def cmd_make_sim_seed(args) -> int:
    records = make_seed_records(
        args.count,
        seed=args.seed,
        difficulty_range=(args.difficulty_low, args.difficulty_high),
        label_pool=args.label_pool,
    )
    write_jsonl(args.out, records)
    print(f"seed dataset: {args.out} ({len(records)} problems)")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "generate": cmd_generate,
        "filter": cmd_filter,
        "analyze": cmd_analyze,
        "make-sim-seed": cmd_make_sim_seed,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except GatewayError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except QdgenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
