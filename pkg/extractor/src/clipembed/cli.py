"""CLI: extract per-window embeddings from a directory of gameplay clips.

Exit codes: 0 success with at least one record; 1 configuration problems
(unknown backbone, missing weights - the message includes export steps) or an
empty result (the empty table is still written); 2 unexpected runtime errors.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .backbones import load_backbone
from .config import BACKBONES, ExtractionConfig, ExtractorError, WeightsNotFoundError
from .extract import extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clipembed", description=__doc__)
    parser.add_argument("--version", action="version", version=f"clipembed {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("extract", help="embed every clip window in a directory")
    p.add_argument("--videos", required=True, help="directory of clips named <game_id>*.mp4")
    p.add_argument("--backbone", choices=sorted(BACKBONES), default="i3d")
    p.add_argument("--weights-dir", required=True, help="directory holding <backbone>.pt exports")
    p.add_argument("--out", required=True, help="output EMB1 table path")
    p.add_argument("--window-s", type=float, default=1.0)
    p.add_argument("--device", default="cpu")
    return parser


def run_command(argv) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        config = ExtractionConfig(
            backbone=args.backbone, window_s=args.window_s, device=args.device
        ).validate()
        backbone = load_backbone(args.backbone, args.weights_dir, device=args.device)
        report = extract(args.videos, backbone, config, args.out)
    except WeightsNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ExtractorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"unexpected error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for clip in report.clips:
        status = clip.error or f"{clip.windows} windows"
        print(f"{clip.path}: {status}")
    print(f"{report.records} records (dim {report.dim}) -> {args.out}")
    return 0 if report.records > 0 else 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
