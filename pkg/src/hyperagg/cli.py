"""Command-line front end.

Subcommands: train, verify, ablate, export-heatmaps. Exit codes are stable:
0 success, 2 usage/config error, 3 numerical failure. The environment
variable HYPERAGG_OUTPUT_ROOT, when set, prefixes every relative output
directory.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import ablation, io, verify
from .config import ExperimentConfig
from .errors import ConfigurationError, EvaluationError
from .train import train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

OUTPUT_ROOT_ENV = "HYPERAGG_OUTPUT_ROOT"


def resolve_output(directory) -> Path:
    directory = Path(directory)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not directory.is_absolute():
        return Path(root) / directory
    return directory


def _load_config(path, overrides):
    config = ExperimentConfig.from_file(path)
    return config.with_overrides(overrides or [])


def cmd_train(args):
    config = _load_config(args.config, args.set)
    out = resolve_output(config["output"]["directory"])
    if (out / "metrics.json").exists() and not args.force:
        raise ConfigurationError(
            f"{out} already holds results; pass --force to overwrite")
    metrics = train(config, output_dir=out)
    print(f"finished: final test accuracy "
          f"{metrics.final_test_accuracy:.4f}, artifacts in {out}")
    return EXIT_OK


def cmd_verify(args):
    try:
        checks = verify.run_suite(args.suite)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    for check in checks:
        print(check.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} invariants hold")
    return EXIT_OK if not failed else EXIT_NUMERICAL


def cmd_ablate(args):
    config = _load_config(args.config, args.set)
    out = resolve_output(config["output"]["directory"])
    out.mkdir(parents=True, exist_ok=True)
    if not args.force:
        for name in ("components.csv", "weights.csv"):
            if (out / name).exists():
                raise ConfigurationError(
                    f"{out / name} exists; pass --force to overwrite")
    components = ablation.run_component_ablation(config)
    ablation.write_table(out / "components.csv", components, force=args.force)
    weight_rows = ablation.run_weight_ablation(config)
    ablation.write_table(out / "weights.csv", weight_rows, force=args.force)
    for entry in components:
        print(f"{entry['row']:>5}: {entry['mean']:.4f} +/- {entry['std']:.4f}")
    print(f"tables written to {out}")
    return EXIT_OK


def cmd_export_heatmaps(args):
    run_dir = resolve_output(args.run)
    incidence_dir = run_dir / "incidence"
    available = sorted(
        int(p.stem.split("_")[1]) for p in incidence_dir.glob("incidence_*.bin")
    ) if incidence_dir.is_dir() else []
    if not available:
        raise ConfigurationError(f"no incidence snapshots under {run_dir}")
    wanted = [int(i) for i in args.ids] if args.ids else available
    missing = sorted(set(wanted) - set(available))
    if missing:
        raise ConfigurationError(
            f"no snapshot for id(s) {missing}; available: {available}")
    out = run_dir / "heatmaps"
    out.mkdir(parents=True, exist_ok=True)
    for sid in wanted:
        matrix = io.load_tensor(incidence_dir / f"incidence_{sid}.bin")
        sidecar = io.read_json(incidence_dir / f"incidence_{sid}.json")
        io.save_csv(out / f"heatmap_{sid}.csv", matrix)
        io.write_json(out / f"heatmap_{sid}.json", sidecar)
    print(f"exported {len(wanted)} heatmap(s) to {out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hyperagg",
        description="hypergraph token aggregation + hyperbolic hierarchy "
                    "experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run one experiment from a config file")
    p.add_argument("config")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override a config value")
    p.add_argument("--force", action="store_true",
                   help="overwrite existing results")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("verify", help="run an invariant suite")
    p.add_argument("suite", choices=verify.SUITES)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("ablate", help="run component and weight ablations")
    p.add_argument("config")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("export-heatmaps",
                       help="export incidence snapshots as heatmap CSVs")
    p.add_argument("run", help="run directory written by train")
    p.add_argument("ids", nargs="*", help="sample ids (default: all)")
    p.set_defaults(fn=cmd_export_heatmaps)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EvaluationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
