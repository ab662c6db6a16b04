"""Command-line frontend: `lmexport export --images D --boxes D --out D`."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .export import ExportConfig, run_export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lmexport", description=__doc__)
    parser.add_argument("--version", action="version", version=f"lmexport {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="compute ConvNet landmark descriptors")
    p.add_argument("--images", required=True, help="directory of images, one per image id")
    p.add_argument("--boxes", required=True, help="directory of <id>.boxes.csv files")
    p.add_argument("--out", required=True, help="output directory for <id>.lmdb1 blocks")
    p.add_argument("--model", default="alexnet", help="torchvision model id (default alexnet)")
    p.add_argument("--layer", default="conv3",
                   help="layer alias (conv1..conv5) or raw node name (default conv3)")
    p.add_argument("--pretrained", action="store_true",
                   help="load IMAGENET1K weights (needs network or a local cache); "
                        "default is a deterministic random init")
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--device", default="cpu")
    p.add_argument("--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        result = run_export(ExportConfig(
            images_dir=Path(args.images), boxes_dir=Path(args.boxes), out_dir=Path(args.out),
            model=args.model, layer=args.layer, pretrained=args.pretrained,
            batch_size=args.batch_size, device=args.device,
        ))
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for image_id, message in result.errors:
        print(f"error: {image_id or '(run)'}: {message}", file=sys.stderr)
    return 1 if result.errors else 0


if __name__ == "__main__":
    sys.exit(main())
