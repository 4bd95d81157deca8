"""
cam2traj command line.

    cam2traj [--config run.yaml] [--set section.key=value ...] [--jobs N] [--debug] <command> [options]

Exit codes: 0 ok, 2 configuration or argument error, 3 data error, 4 verification failure, 5 benchmark below the
gate, 6 run failure (training diverged, expert lost, vehicle off route).
"""

import argparse
import sys
from typing import List

from cli import commands
from cli.config import RunConfig
from logger.logger import logger, set_log_level
from utils.exceptions import (ConfigError, InvalidArgumentError, OutOfRangeError, UnsupportedVariantError,
                              DatasetLoadError, MapFormatError, CheckpointError, ShapeMismatchError, VerificationError,
                              TrainingAbortError, ExpertLostError, OffRouteError, StalePlanError)

EXIT_CODES = {ConfigError: 2, InvalidArgumentError: 2, OutOfRangeError: 2, UnsupportedVariantError: 2,
              DatasetLoadError: 3, MapFormatError: 3, CheckpointError: 3, ShapeMismatchError: 3,
              VerificationError: 4,
              TrainingAbortError: 6, ExpertLostError: 6, OffRouteError: 6, StalePlanError: 6}


def _output(parser) -> None:
    parser.add_argument("--output", help="output directory (default: <output_dir>/<command>)")


def _records(parser) -> None:
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--dataset", required=True, help="dataset directory")
    parser.add_argument("--split", default="test", choices=("train", "val", "test"))
    parser.add_argument("--samples", type=int, default=8, help="number of records")
    parser.add_argument("--start", type=int, default=0, help="index of the first record in the split")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cam2traj", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", help="YAML run configuration")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one configuration value (repeatable)")
    parser.add_argument("--jobs", type=int, help="worker processes (overrides `jobs`)")
    parser.add_argument("--seed", type=int, help="run seed (overrides `seed`)")
    parser.add_argument("--debug", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="drive the expert and record episodes")
    p.add_argument("--episodes", type=int, help="episodes per weather")
    p.add_argument("--weathers", nargs="+")
    _output(p)
    p.set_defaults(handler=commands.cmd_collect)

    p = sub.add_parser("build-dataset", help="records, balance and split from recorded episodes")
    p.add_argument("--episodes", required=True, help="collection directory")
    _output(p)
    p.set_defaults(handler=commands.cmd_build_dataset)

    p = sub.add_parser("train", help="train one model variant")
    p.add_argument("--dataset", required=True)
    p.add_argument("--variant", help="overrides model.variant")
    _output(p)
    p.set_defaults(handler=commands.cmd_train)

    p = sub.add_parser("eval-open", help="open-loop metrics of one or more checkpoints")
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoints", nargs="+", required=True)
    p.add_argument("--names", nargs="+", help="row names, one per checkpoint")
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--max-samples", type=int)
    _output(p)
    p.set_defaults(handler=commands.cmd_eval_open)

    p = sub.add_parser("eval-closed", help="closed-loop benchmark under steering noise")
    p.add_argument("--checkpoint")
    p.add_argument("--planner", default="model", choices=("model", "expert-replay", "null"))
    p.add_argument("--dataset", help="dataset whose val split calibrates the uncertainty threshold")
    _output(p)
    p.set_defaults(handler=commands.cmd_eval_closed)

    p = sub.add_parser("grad-check", help="verify the gradients of every differentiable op")
    p.add_argument("--seeds", type=int, default=5)
    _output(p)
    p.set_defaults(handler=commands.cmd_grad_check)

    p = sub.add_parser("dump-attention", help="attention weights over the history of some records")
    _records(p)
    _output(p)
    p.set_defaults(handler=commands.cmd_dump_attention)

    p = sub.add_parser("dump-features", help="channel-averaged feature maps of some records")
    _records(p)
    p.set_defaults(samples=1)
    _output(p)
    p.set_defaults(handler=commands.cmd_dump_features)

    p = sub.add_parser("report", help="collect the tables of earlier runs into report.md")
    p.add_argument("runs", nargs="+", help="output directories of earlier commands")
    _output(p)
    p.set_defaults(handler=commands.cmd_report)
    return parser


def main(argv: List[str] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.debug:
        set_log_level("DEBUG")
    overrides = list(args.overrides)
    if args.jobs is not None:
        overrides.append(f"jobs={args.jobs}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    try:
        run = RunConfig.load(args.config, overrides)
        return args.handler(args, run)
    except tuple(EXIT_CODES) as e:
        logger.error(f"{type(e).__name__}: {' '.join(str(e).split())}")
        return next(code for cls, code in EXIT_CODES.items() if isinstance(e, cls))


def run() -> None:
    sys.exit(main())
