"""Command line entry point: ``lambert-sb {solve,validate,info}``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

from threadpoolctl import threadpool_limits

from .config import ConfigError, RunConfig, dump_config, load_config
from .pipeline import StageError, execute
from .validation import CHECKS, run_validation

EXIT_OK = 0
EXIT_NOT_CONVERGED = 2
EXIT_VALIDATION = 3
EXIT_IO = 4

THREADS_ENV = "LAMBERT_SB_THREADS"

log = logging.getLogger("lambert_sb")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (defaults used when omitted)")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--seed", type=_seed, help="simulation seed (overrides seed)")
    common.add_argument("--threads", type=_positive_int, help=f"BLAS threads (else ${THREADS_ENV})")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="lambert-sb", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)
    solve = sub.add_parser("solve", parents=[common], help="run the full pipeline and write artifacts")
    solve.add_argument("--no-simulate", action="store_true", help="skip the closed-loop sample paths")
    val = sub.add_parser("validate", parents=[common], help="run the oracle self-checks")
    val.add_argument("--check", action="append", choices=sorted(CHECKS), help="run only these checks")
    sub.add_parser("info", parents=[common], help="print the effective configuration")
    return parser


def _resolve_threads(flag: int | None) -> int | None:
    if flag is not None:
        return flag
    env = os.environ.get(THREADS_ENV)
    if not env:
        return None
    try:
        n = int(env)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV}={env!r} is not an integer") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1")
    return n


def effective_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    return dataclasses.replace(config, **overrides) if overrides else config


def _solve(config: RunConfig, simulate: bool) -> int:
    try:
        run = execute(config, simulate=simulate)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO if isinstance(exc.cause, OSError) else EXIT_VALIDATION
    s = run.summary
    print(f"status: {s.status}  iterations: {s.iterations_used}  terminal residual: {s.terminal_residual:.4g}")
    if s.endpoint_statistics:
        mean = ", ".join(f"{m:.1f}" for m in s.endpoint_statistics["mean_km"])
        print(f"endpoint mean [km]: [{mean}]  min radius: {s.min_radius_km:.1f} km")
    print(f"wrote {len(run.manifest)} files to {config.output_dir}")
    return EXIT_OK if s.converged else EXIT_NOT_CONVERGED


def _validate(names) -> int:
    results = run_validation(names)
    for res in results:
        print(res.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = effective_config(args)
        threads = _resolve_threads(args.threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    with threadpool_limits(limits=threads):
        if args.verb == "info":
            sys.stdout.write(dump_config(config))
            return EXIT_OK
        if args.verb == "validate":
            return _validate(args.check)
        return _solve(config, simulate=not args.no_simulate)


if __name__ == "__main__":
    sys.exit(main())
