"""Command-line entry point: ``ratingnet <stage> [options]``.

Exit codes: 0 success, 2 configuration error, 3 missing upstream artifact,
4 runtime or convergence error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import PipelineConfig, load_config
from .errors import ConfigError, DependencyError, RatingNetError
from .pipeline import STAGES, run_stage

EXIT_OK, EXIT_CONFIG, EXIT_DEPENDENCY, EXIT_RUNTIME = 0, 2, 3, 4

PIPELINES = {
    "synth": ("synth", "split", "featurize", "train", "evaluate", "report"),
    "ingest": ("ingest", "split", "featurize", "train", "evaluate", "report"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="flat key = value config file")
    common.add_argument("-o", "--out", help="run directory (config key out_dir)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key; repeatable")
    common.add_argument("--models", help="comma-separated model list")
    common.add_argument("--limit", type=int, help="keep the first N edges after time sort")
    common.add_argument("--workers", type=int, help="intra-stage worker threads")
    common.add_argument("--seed", type=int)
    common.add_argument("--input", help="review file for the ingest stage")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ratingnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="stage", required=True)
    for stage in STAGES:
        sub.add_parser(stage, parents=[common], help=f"run the {stage} stage")
    p = sub.add_parser("run", parents=[common], help="run every stage from synth or ingest to report")
    p.add_argument("--from", dest="source", choices=sorted(PIPELINES), default="synth")
    return parser


def resolve_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected KEY=VALUE")
        key, value = item.split("=", 1)
        cfg.set(key.strip(), value, f"--set {key.strip()}")
    overrides = {"out_dir": args.out, "models": args.models, "limit": args.limit,
                 "workers": args.workers, "seed": args.seed, "input": args.input}
    for key, value in overrides.items():
        if value is not None:
            cfg.set(key, str(value), f"--{key.replace('_', '-')}")
    return cfg.validate()


def _print_result(stage, result):
    if stage == "report":
        print(result)
    elif stage == "evaluate":
        for r in result:
            print(f"{r.model:<10} {r.dataset:<10} rmse={r.rmse:.6f} relerror={r.relerror:.4f} r2={r.r2:.6f}")
    elif result is not None:
        print(json.dumps(result, indent=1, sort_keys=True, default=str))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        stages = PIPELINES[args.source] if args.stage == "run" else (args.stage,)
        for stage in stages:
            result = run_stage(stage, cfg)
            if args.stage != "run" or stage == "report":
                _print_result(stage, result)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DependencyError as exc:
        print(f"dependency error: {exc}", file=sys.stderr)
        return EXIT_DEPENDENCY
    except RatingNetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
