"""Command-line front end for the feature extractor.

Exit codes: 0 success, 2 bad arguments or configuration, 3 missing or
unreadable data (images, checkpoints). Diagnostics and resize notices
go to stderr; one ``wrote ...`` line per tensor goes to stdout.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, DinofeatError
from .extract import DEFAULT_SIZE, DEFAULT_WEIGHTS, LAYERS, ExtractorConfig, extract

_TOOL = "extract"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=_TOOL,
        description="Export ViT-S/16 patch features as NPY tensors.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--input", required=True, type=Path, metavar="PATH",
        help="image file, or directory of images (png/jpg/jpeg/bmp)",
    )
    parser.add_argument(
        "--output", required=True, type=Path, metavar="DIR",
        help="directory for the .npy tensors and manifest.json",
    )
    parser.add_argument(
        "--layer", choices=list(LAYERS), default="keys",
        help="feature source in the final block (default: keys)",
    )
    parser.add_argument(
        "--size", type=int, default=DEFAULT_SIZE, metavar="PX",
        help="shorter-side target; both sides snap to the 16px patch grid "
        f"(default: {DEFAULT_SIZE})",
    )
    parser.add_argument("--device", default="cpu", help="torch device (default: cpu)")
    parser.add_argument(
        "--weights", type=Path, default=None, metavar="PTH",
        help=f"checkpoint path (default: {DEFAULT_WEIGHTS})",
    )
    parser.add_argument(
        "--allow-random-init", action="store_true",
        help="run a seeded untrained network instead of loading a checkpoint",
    )
    parser.add_argument(
        "--seed", type=int, default=0,
        help="parameter seed for --allow-random-init (default: 0)",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    cfg = ExtractorConfig(
        layer=args.layer,
        size=args.size,
        device=args.device,
        weights=args.weights,
        random_init=args.allow_random_init,
        seed=args.seed,
    )
    try:
        manifest = extract(
            args.input,
            args.output,
            cfg,
            notify=lambda message: print(f"{_TOOL}: {message}", file=sys.stderr),
        )
    except ConfigError as exc:
        print(f"{_TOOL}: {exc}", file=sys.stderr)
        return 2
    except DinofeatError as exc:
        print(f"{_TOOL}: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"{_TOOL}: {exc}", file=sys.stderr)
        return 3
    for entry in manifest["images"]:
        shape = "x".join(str(side) for side in entry["shape"])
        print(f"wrote {args.output / entry['output']} ({shape})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
