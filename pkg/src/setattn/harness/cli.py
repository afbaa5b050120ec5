"""Command-line entry point.

Exit status is 0 on success. On failure a single JSON line
``{"error": <kind>, "message": <text>, ...}`` goes to stderr and the exit
status is 2 for invalid input or 1 for runtime failures.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from setattn.harness.combinatorics import state_space_sizes
from setattn.harness.config import ConfigError
from setattn.harness.experiment import compare, run_experiment
from setattn.harness.greedy import estimate_greedy_return
from setattn.harness.plot import emit_plot


def _fail(kind, message, code, **extra):
    print(json.dumps({"error": kind, "message": message, **extra}, sort_keys=True), file=sys.stderr)
    return code


def cmd_train(args):
    report, run_dir = run_experiment(args.config, workers=args.workers, output_dir=args.output_dir)
    sys.stdout.write(report.summary())
    print(f"outputs: {run_dir}")


def cmd_compare(args):
    report, out_dir = compare([args.config_a, args.config_b], workers=args.workers, output_dir=args.output_dir)
    sys.stdout.write(report.summary())
    print(f"outputs: {out_dir}")


def cmd_combinatorics(args):
    ordered, unordered, ratio = state_space_sizes(args.n, args.m)
    print(json.dumps({"n": args.n, "m": args.m, "ordered": ordered, "unordered": unordered,
                      "ratio": str(ratio)}))


def cmd_greedy(args):
    records = [] if args.dump else None
    mean, std = estimate_greedy_return(args.task, args.m, args.episodes, args.seed, records)
    if args.dump:
        from setattn.envs import write_trajectory_dump

        write_trajectory_dump(args.dump, records)
    print(json.dumps({"task": args.task, "m": args.m, "episodes": args.episodes, "seed": args.seed,
                      "mean": mean, "std": std}))


def cmd_plot(args):
    emit_plot(args.csv, args.out, reference=args.reference, window=args.window)
    print(f"wrote {args.out}")


def build_parser():
    parser = argparse.ArgumentParser(prog="setattn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train every seed of one experiment config")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="run two configs and write a joint report")
    p.add_argument("config_a")
    p.add_argument("config_b")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("combinatorics", help="ordered vs unordered state-space sizes")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.set_defaults(func=cmd_combinatorics)

    p = sub.add_parser("greedy", help="Monte-Carlo return of the greedy reference policy")
    p.add_argument("--task", required=True, choices=["scavenger1", "scavenger2", "convoy"])
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--episodes", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dump", default=None, help="write a per-step trajectory CSV")
    p.set_defaults(func=cmd_greedy)

    p = sub.add_parser("plot", help="render curve CSVs to SVG")
    p.add_argument("csv", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--reference", type=float, default=None)
    p.add_argument("--window", type=int, default=50)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        return _fail("config", exc.detail, 2, field=exc.field_path)
    except (ValueError, FileNotFoundError) as exc:
        return _fail("invalid-input", str(exc), 2)
    except Exception as exc:  # noqa: BLE001 - reported as a machine-readable line
        return _fail("runtime", f"{type(exc).__name__}: {exc}", 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
