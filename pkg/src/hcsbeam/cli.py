"""
Command line entry point.

``hcs run --config FILE [--sweep T|R|SNR] [--seed N] [--out DIR] [--methods zf,iso,hcs]``

Exit status: 0 on success, 2 for configuration errors, 3 for numerical
failures (rank-deficient channels, zero patterns and the like), 1 for
anything else such as unwritable output.
"""

import argparse
import logging
import sys
from pathlib import Path

from .errors import ConfigError, HcsError
from .harness import ExperimentConfig, emit_csv, run_experiment, summary_table, worker_count

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

log = logging.getLogger("hcsbeam")


def build_parser():
    # argparse exits with status 2 on bad usage, which matches EXIT_CONFIG
    parser = argparse.ArgumentParser(prog="hcs", description="Capacity/sidelobe trade-off beamforming experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("--config", required=True, help="JSON experiment file")
    run.add_argument("--sweep", choices=["T", "R", "SNR"], type=str.upper, help="sweep axis")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--out", help="output directory (default: config 'out')")
    run.add_argument("--methods", help="comma-separated subset of zf,iso,hcs")
    run.add_argument("-q", "--quiet", action="store_true", help="do not print the summary table")
    return parser


def _run(args):
    config = ExperimentConfig.from_json(args.config).with_overrides(
        sweep=args.sweep, seed=args.seed, out=args.out, methods=args.methods
    )
    workers = worker_count()
    log.info("running %d point(s), methods %s, %d worker(s)", len(config.points()), ",".join(config.methods), workers)
    reports = run_experiment(config, workers=workers)
    path, beam_path = emit_csv(reports, Path(config.out) / "metrics.csv")
    if not args.quiet:
        print(summary_table(reports))
        print(f"\nwrote {path} and {beam_path}")
    return EXIT_OK


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HcsError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
