"""Command line entry point for running and replaying experiments.

Exit codes: 0 success (all verdicts PASS, replay matched), 1 at least
one FAIL or replay mismatch, 2 invalid configuration (nothing written).
"""

from __future__ import annotations

import argparse
import sys

from .experiments import REGISTRY, ConfigError, load_config, replay, run


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="gibbsflow",
        description="Run reproducible point-process experiments from TOML configs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config", help="path to a TOML experiment config")
    p_run.add_argument("--out", default="runs", help="root directory for run dirs")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the config seed (also: GIBBSFLOW_SEED)")
    p_run.add_argument("--threads", type=int, default=None,
                       help="worker processes (also: GIBBSFLOW_THREADS)")

    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("config")

    sub.add_parser("list-experiments", help="list registered experiment kinds")

    p_rep = sub.add_parser("replay",
                           help="re-run a finished run dir and compare results")
    p_rep.add_argument("run_dir")
    p_rep.add_argument("--threads", type=int, default=None)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    if args.command == "list-experiments":
        for name in sorted(REGISTRY):
            print("%-22s %s" % (name, REGISTRY[name].description))
        return 0
    if args.command == "validate":
        try:
            config = load_config(args.config)
        except (ConfigError, OSError) as exc:
            print("invalid config: %s" % exc, file=sys.stderr)
            return 2
        print("ok: %s (%s)" % (config["name"], config["kind"]))
        return 0
    if args.command == "run":
        try:
            run_dir, n_failed = run(args.config, args.out,
                                    cli_seed=args.seed, cli_threads=args.threads)
        except (ConfigError, OSError) as exc:
            print("invalid config: %s" % exc, file=sys.stderr)
            return 2
        print("run dir: %s" % run_dir)
        if n_failed:
            print("%d verdict(s) FAILED" % n_failed, file=sys.stderr)
            return 1
        print("all verdicts PASS")
        return 0
    if args.command == "replay":
        try:
            matched = replay(args.run_dir, cli_threads=args.threads)
        except (ConfigError, OSError, KeyError) as exc:
            print("replay failed: %s" % exc, file=sys.stderr)
            return 2
        if matched:
            print("replay matched: results.csv is byte-identical")
            return 0
        print("replay MISMATCH: results.csv differs", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
