"""Command-line pipeline: synth -> cluster -> build -> score -> eval -> bench.

Logs go to stderr, data to files or stdout. Exit codes: 0 success, 2 usage,
3 data validation, 4 I/O. Flag values override a JSON config file
(``--config``), which overrides built-in defaults. ``CLUSTERBANK_OUT`` sets
the default output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import harness
from .archive import ArchiveError, read_archive, write_archive, write_blob
from .bank import BankError, MODE_LABELED, MODE_PSEUDO, build, load, save
from .clustering import finch, select_level
from .coreset import CoresetConfig
from .harness import Scenario, ScenarioError
from .metrics import MetricError
from .scoring import score_batch, write_scores_jsonl
from .synth import separable_spec, synth_generate

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _out_dir(args, default: str = ".") -> Path:
    out = getattr(args, "out", None)
    if out is None:
        out = os.environ.get("CLUSTERBANK_OUT", default)
    if str(out) == "":
        raise OSError("output path is empty")
    return Path(out)


def _coreset_cfg(args) -> CoresetConfig:
    return CoresetConfig(ratio=args.ratio, seed=args.seed)


def cmd_synth(args) -> int:
    spec = separable_spec(
        n_classes=args.classes,
        margin=args.margin,
        semantic_dim=args.semantic_dim,
        patch_dim=args.patch_dim,
        delta=args.delta,
        train_per_class=args.train_per_class,
        test_per_class=args.test_per_class,
        grid=(args.grid, args.grid),
        image_size=(args.image_size, args.image_size),
        anomaly_rate=args.anomaly_rate,
    )
    archive = synth_generate(spec, seed=args.seed)
    out = _out_dir(args)
    write_archive(archive, out)
    _log(f"synth: wrote {len(archive.manifest)} records to {out}")
    return EXIT_OK


def cmd_cluster(args) -> int:
    archive = read_archive(args.archive)
    train = archive.train_records()
    semantics = np.stack([r.semantic for r in train]).astype(np.float64)
    model = select_level(finch(semantics), semantics)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "cluster_model.json")
    _log(f"cluster: K={model.n_clusters} over {len(train)} train records")
    return EXIT_OK


def cmd_build(args) -> int:
    archive = read_archive(args.archive)
    mode = MODE_LABELED if args.mode == "labeled" else MODE_PSEUDO
    bank = build(archive, _coreset_cfg(args), mode=mode)
    out = _out_dir(args)
    save(bank, out)
    _log(
        f"build: K={bank.n_clusters}, bank sizes {bank.bank_sizes()}, "
        f"mode={bank.mode}, saved to {out}"
    )
    return EXIT_OK


def cmd_score(args) -> int:
    archive = read_archive(args.archive)
    bank = load(args.bank)
    results, counters = score_batch(
        archive, bank, smooth_sigma=args.smooth_sigma, threads=args.threads
    )
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    write_scores_jsonl(results, out / "scores.jsonl")
    if args.save_maps:
        maps_dir = out / "maps"
        maps_dir.mkdir(exist_ok=True)
        for res in results:
            write_blob(maps_dir / f"{res.record_id}.map", res.score_map)
    _log(
        f"score: {len(results)} records, "
        f"{counters.query_distance_evals} query distance evals"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    archive = read_archive(args.archive)
    scenario = Scenario.parse(args.scenario)
    engine = args.engine
    if args.bank:
        bank = load(args.bank)
        expected = MODE_LABELED if scenario.training == harness.KNOWN else MODE_PSEUDO
        if engine == "hierarchical" and bank.mode != expected:
            raise ScenarioError(
                f"scenario {scenario} requires a {expected}-mode bank, "
                f"got {bank.mode!r}"
            )
        report = harness.evaluate_bank(
            archive, bank, scenario, engine=engine,
            smooth_sigma=args.smooth_sigma, threads=args.threads,
        )
    else:
        report = harness.run_scenario(
            archive, scenario, _coreset_cfg(args), engine=engine,
            smooth_sigma=args.smooth_sigma, threads=args.threads,
        )
    out = _out_dir(args)
    report.save(out)
    _log(
        f"eval: scenario {scenario}, grouping {report.grouping}, "
        f"image mAD {report.metrics.image_macro['mad']:.4f}, "
        f"pixel mAD {report.metrics.pixel_macro['mad']:.4f}"
    )
    return EXIT_OK


def cmd_bench(args) -> int:
    archive = read_archive(args.archive)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    rows = harness.bench(archive, _coreset_cfg(args), out_csv=out / "bench.csv",
                         threads=args.threads)
    for row in rows:
        _log(
            f"bench: {row['scenario']}: K={row['K']} P={row['P']} "
            f"build={row['build_evals']} query={row['query_evals']} "
            f"diff_ratio={row['diff_ratio']:.2f}%"
        )
    return EXIT_OK


def cmd_export(args) -> int:
    archive = read_archive(args.archive)
    bank = load(args.bank)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    harness.export_embeddings(archive, bank, out / "embeddings.csv")
    _log(f"export: {len(archive.manifest)} rows")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ratio", type=float, default=0.10, help="coreset sampling ratio")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--smooth-sigma", dest="smooth_sigma", type=float, default=None,
                   help="optional Gaussian blur of score maps")
    p.add_argument("-o", "--out", default=None, help="output directory")
    p.add_argument("--config", default=None, help="JSON config file (flags win)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clusterbank", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic feature archive")
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--margin", type=float, default=10.0)
    p.add_argument("--semantic-dim", dest="semantic_dim", type=int, default=8)
    p.add_argument("--patch-dim", dest="patch_dim", type=int, default=16)
    p.add_argument("--delta", type=float, default=5.0)
    p.add_argument("--train-per-class", dest="train_per_class", type=int, default=50)
    p.add_argument("--test-per-class", dest="test_per_class", type=int, default=20)
    p.add_argument("--grid", type=int, default=8)
    p.add_argument("--image-size", dest="image_size", type=int, default=64)
    p.add_argument("--anomaly-rate", dest="anomaly_rate", type=float, default=0.5)
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("cluster", help="cluster train semantics, write cluster_model.json")
    p.add_argument("-a", "--archive", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("build", help="build a memory bank")
    p.add_argument("-a", "--archive", required=True)
    p.add_argument("--mode", choices=["pseudo", "labeled"], default="pseudo")
    _add_common(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("score", help="score the test split, write scores.jsonl")
    p.add_argument("-a", "--archive", required=True)
    p.add_argument("-b", "--bank", required=True)
    p.add_argument("--save-maps", dest="save_maps", action="store_true",
                   help="also write per-record score maps as HCFS blobs")
    _add_common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="run a scenario, write report.json/report.csv")
    p.add_argument("-a", "--archive", required=True)
    p.add_argument("-b", "--bank", default=None, help="prebuilt bank (built fresh if omitted)")
    p.add_argument("--scenario", required=True, help="kk, uk, ku, or uu")
    p.add_argument("--engine", choices=["hierarchical", "monolithic"], default="hierarchical")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="cost + diff-ratio comparison, write bench.csv")
    p.add_argument("-a", "--archive", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("export", help="dump semantic embeddings + assignments to CSV")
    p.add_argument("-a", "--archive", required=True)
    p.add_argument("-b", "--bank", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_export)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config", default=None)
    known, _ = probe.parse_known_args(argv)
    if known.config:
        with open(known.config) as f:
            cfg = json.load(f)
        if not isinstance(cfg, dict):
            raise ArchiveError(f"config {known.config} must be a JSON object")
        for sub_action in parser._subparsers._group_actions:  # noqa: SLF001
            for sp in sub_action.choices.values():
                sp.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except FileNotFoundError as e:
        print(f"error: io: {e}", file=sys.stderr)
        return EXIT_IO
    except (ArchiveError, json.JSONDecodeError) as e:
        print(f"error: validation: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except (ArchiveError, BankError, MetricError, ScenarioError, ValueError) as e:
        print(f"error: validation: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"error: io: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
