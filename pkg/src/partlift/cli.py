"""Command-line entry point: run, eval, and synth subcommands."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

from .pipeline import EXIT_UNREADABLE, PipelineConfig, cmd_eval, cmd_run, cmd_synth
from .synth import SHAPE_BUILDERS


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    """One flag per PipelineConfig field; unset flags fall back to the config file."""
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON file with PipelineConfig fields")
    defaults = PipelineConfig()
    for f in fields(PipelineConfig):
        flag = "--" + f.name.replace("_", "-")
        kwargs = {"default": None,
                  "help": f"default {getattr(defaults, f.name)!r}"}
        if f.type in ("int", int):
            kwargs["type"] = int
        elif f.type in ("float", float):
            kwargs["type"] = float
        else:
            kwargs["type"] = str
        parser.add_argument(flag, **kwargs)


def _build_config(args: argparse.Namespace) -> PipelineConfig:
    config = PipelineConfig()
    if args.config is not None:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        config = PipelineConfig.from_dict(data)
    overrides = {f.name: getattr(args, f.name)
                 for f in fields(PipelineConfig)
                 if getattr(args, f.name) is not None}
    return replace(config, **overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="partlift",
        description="Multi-view mask fusion for 3D part segmentation")
    parser.add_argument("--verbose", action="store_true",
                        help="log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="render, segment, and fuse a manifest")
    run.add_argument("--manifest", type=Path, required=True)
    run.add_argument("--out", type=Path, required=True)
    _add_config_flags(run)

    ev = sub.add_parser("eval", help="score predictions against ground truth")
    ev.add_argument("--pred-dir", type=Path, required=True)
    ev.add_argument("--manifest", type=Path, required=True)
    ev.add_argument("--out", type=Path, default=None,
                    help="report path (default: <pred-dir>/eval_report.json)")
    ev.add_argument("--include-background", action="store_true",
                    help="score background (-1) as its own object category")

    synth = sub.add_parser("synth", help="generate a labeled synthetic shape")
    synth.add_argument("--shape", choices=sorted(SHAPE_BUILDERS), required=True)
    synth.add_argument("--points", type=int, default=5000)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", type=Path, required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        try:
            config = _build_config(args)
        except (ValueError, OSError, json.JSONDecodeError) as exc:
            logging.getLogger(__name__).error("bad configuration: %s", exc)
            return EXIT_UNREADABLE
        return cmd_run(args.manifest, config, args.out)
    if args.command == "eval":
        return cmd_eval(args.pred_dir, args.manifest, args.out,
                        include_background=args.include_background)
    if args.command == "synth":
        try:
            return cmd_synth(args.shape, args.points, args.seed, args.out)
        except ValueError as exc:
            logging.getLogger(__name__).error("%s", exc)
            return EXIT_UNREADABLE
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
