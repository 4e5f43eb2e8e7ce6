"""Command line entry point: ``delab simulate | verify | export``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, DelabError
from .experiment import ExperimentConfig, export, load_report, run
from .suite import verify

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def _threads(value):
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("thread count must be >= 1")
    return n


def build_parser():
    parser = argparse.ArgumentParser(prog="delab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=_threads, default=None,
                        help="worker threads (default: $DEL_THREADS or 1)")
    common.add_argument("--out", type=Path, default=None, help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="run an experiment config")
    sim.add_argument("--config", type=Path, required=True)

    ver = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    ver.add_argument("--level", choices=("fast", "full"), default="fast")
    ver.add_argument("--inject-fault", choices=("binomial",), default=None, help=argparse.SUPPRESS)

    exp = sub.add_parser("export", parents=[common], help="re-export a JSON report")
    exp.add_argument("--report", type=Path, required=True)
    exp.add_argument("--format", choices=("csv", "json"), required=True)
    return parser


def _simulate(args):
    try:
        config = ExperimentConfig.load(args.config)
    except ConfigError as exc:
        print("invalid config:", file=sys.stderr)
        for problem in exc.problems:
            print(f"  - {problem}", file=sys.stderr)
        return EXIT_USAGE
    report = run(config, threads=args.threads)
    out_dir = args.out or Path(config.output or ".")
    csv_path = export(report, "csv", out_dir)
    json_path = export(report, "json", out_dir)
    for verdict in report.verdicts:
        status = "PASS" if verdict["passed"] else "FAIL"
        print(f"{status} {verdict['metric']} ({verdict['kind']}): {verdict.get('measured')}")
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK if report.passed else EXIT_FAILED


def _verify(args):
    summary = verify(args.level, inject_fault=args.inject_fault)
    text = json.dumps(summary, indent=2, default=str)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / f"verify-{args.level}.json").write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK if summary["passed"] else EXIT_FAILED


def _export(args):
    report = load_report(args.report)
    print(export(report, args.format, args.out or args.report.parent, stem=args.report.stem))
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None) is None and os.environ.get("DEL_THREADS"):
        try:
            args.threads = _threads(os.environ["DEL_THREADS"])
        except (ValueError, argparse.ArgumentTypeError):
            print(f"invalid DEL_THREADS={os.environ['DEL_THREADS']!r}", file=sys.stderr)
            return EXIT_USAGE
    handlers = {"simulate": _simulate, "verify": _verify, "export": _export}
    try:
        return handlers[args.command](args)
    except (DelabError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except OSError as exc:
        print(exc, file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
