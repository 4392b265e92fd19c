"""``extbandit`` command line: run, shape, analyze, bench.

Exit codes: 0 success, 1 partial failure, 2 configuration/usage error,
3 environment (reward source) error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import SEED_ENV_VAR, config_json_schema, load_config
from .core import ConfigError, EnvironmentFailure

log = logging.getLogger("extbandit")

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG, EXIT_ENV = 0, 1, 2, 3


def _seed(args) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV_VAR)
    return int(env) if env else None


def cmd_run(args) -> int:
    from .runner import run_sweep

    exp = load_config(args.config, args.seed)
    summary = run_sweep(exp, args.out, parallel=args.parallel, resume=args.resume)
    log.info("completed %d cells, skipped %d, failed %d",
             summary.completed, summary.skipped, summary.failed)
    for err in summary.errors:
        print(f"failed: {err}", file=sys.stderr)
    return summary.exit_code


def cmd_shape(args) -> int:
    from .pipelines import shape_report

    rows = shape_report(args.config, args.out, samples=args.samples, seed=args.seed,
                        reward_transform=args.reward_transform)
    skipped = sum(1 for r in rows if r[4] == "")
    log.info("wrote %d arms (%d skipped as degenerate)", len(rows), skipped)
    return EXIT_OK


def cmd_analyze(args) -> int:
    from .pipelines import analyze

    analyze(args.results, args.reference, args.out, allow_partial=args.allow_partial,
            iterations=args.iterations)
    return EXIT_OK


def cmd_bench(args) -> int:
    from .pipelines import run_bench, write_bench

    seed = _seed(args)
    result = run_bench(args.experiment, args.horizon, args.reps, seed or 0, args.parallel)
    write_bench(result, args.out, traces=args.traces)
    return EXIT_OK


def cmd_schema(args) -> int:
    print(json.dumps(config_json_schema(), indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="extbandit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="experiment config (YAML/JSON)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help=f"base seed (overrides ${SEED_ENV_VAR} and the config)")
        p.add_argument("--parallel", type=int, default=1, help="worker processes")

    p = sub.add_parser("run", help="execute a seeded sweep")
    common(p)
    p.add_argument("--resume", action="store_true", help="skip cells completed in the manifest")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("shape", help="shape constants and gaps per arm")
    common(p)
    p.add_argument("--samples", type=int, default=100_000, help="samples per synthetic arm")
    p.add_argument("--reward-transform", default="negate",
                   choices=("negate", "one_minus", "identity"))
    p.set_defaults(func=cmd_shape)

    p = sub.add_parser("analyze", help="ranks, win/tie/loss, regret and pull counts")
    common(p, config=False)
    p.add_argument("--results", required=True, help="directory written by 'run'")
    p.add_argument("--reference", required=True, help="policy id to compare against")
    p.add_argument("--allow-partial", action="store_true")
    p.add_argument("--iterations", type=int, default=1000, help="bootstrap iterations")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("bench", help="built-in synthetic experiments 1-4")
    common(p, config=False)
    p.add_argument("--experiment", type=int, required=True, choices=(1, 2, 3, 4))
    p.add_argument("--horizon", type=int, default=2000)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--traces", action="store_true", help="also write per-pull results")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("schema", help="print the config JSON schema")
    p.set_defaults(func=cmd_schema)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "parallel", 1) < 1:
            raise ConfigError("--parallel must be at least 1")
        return args.func(args)
    except EnvironmentFailure as exc:
        print(f"environment error: {exc}", file=sys.stderr)
        return EXIT_ENV
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
