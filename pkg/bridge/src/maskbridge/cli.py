"""Launch the bridge service from the command line."""

import argparse
import logging

from .rules import DEFAULT_RULE, HeuristicRule
from .service import DEFAULT_MAX_PIXELS, serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="maskbridge",
        description="HTTP segmentation service with a color-threshold heuristic")
    parser.add_argument("--port", type=int, default=8191)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--radius", type=float, default=None,
                        help=f"color match radius in RGB units "
                             f"(default {DEFAULT_RULE.default_radius:g})")
    parser.add_argument("--max-pixels", type=int, default=DEFAULT_MAX_PIXELS,
                        help="reject larger images with HTTP 413")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    rules = DEFAULT_RULE
    if args.radius is not None:
        rules = HeuristicRule(centers=DEFAULT_RULE.centers,
                              default_radius=args.radius)
    serve(args.port, rules, host=args.host, max_pixels=args.max_pixels)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
