"""Command line entry point.

    carvetex carve    --config run.cfg
    carvetex remesh   --config run.cfg
    carvetex paint    --config run.cfg
    carvetex inpaint  --config run.cfg
    carvetex pipeline --config run.cfg
    carvetex attend-demo --out demo/

Any config key can be overridden with --set section.key=value.  Exit
codes: 0 success, 2 bad configuration or input, 1 processing failure.
"""

from __future__ import annotations

import argparse
import sys
import time

from .errors import InvalidArgumentError, OutOfRangeError, ParseError
from . import pipeline as pl

_CONFIG_COMMANDS = {
    "carve": pl.cmd_carve,
    "remesh": pl.cmd_remesh,
    "paint": pl.cmd_paint,
    "inpaint": pl.cmd_inpaint,
    "pipeline": pl.cmd_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="carvetex",
        description="Carve occupancy fields into textured meshes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("carve", "sample the field, extract and remesh the surface"),
        ("remesh", "isotropically remesh an existing OBJ"),
        ("paint", "render views and back-project them onto an atlas"),
        ("inpaint", "re-run occlusion inpainting on a saved atlas"),
        ("pipeline", "carve then paint, end to end"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="INI-style config file")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a config value")
        p.add_argument("--workers", type=int, default=1,
                       help="worker count (reserved; stages run single-threaded)")
    demo = sub.add_parser("attend-demo", help="visualize decoupled cross-attention")
    demo.add_argument("--out", required=True, help="output directory for PNGs")
    demo.add_argument("--views", type=int, default=4)
    demo.add_argument("--size", type=int, default=16)
    demo.add_argument("--channels", type=int, default=8)
    demo.add_argument("--tokens", type=int, default=3)
    demo.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        if args.command == "attend-demo":
            stats = pl.cmd_attend_demo(
                args.out, n_views=args.views, size=args.size,
                channels=args.channels, tokens=args.tokens, seed=args.seed,
            )
        else:
            cfg = pl.load_config(args.config, overrides=args.set)
            stats = _CONFIG_COMMANDS[args.command](cfg)
    except (InvalidArgumentError, OutOfRangeError, ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # processing failure
        print(f"processing error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    elapsed = time.perf_counter() - start
    for key, value in stats.items():
        print(f"{key}={value}")
    print(f"elapsed_seconds={elapsed:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
