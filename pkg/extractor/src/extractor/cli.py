"""``extract`` command line: dataset directory -> feature archive."""

from __future__ import annotations

import argparse
import sys

from .dataset import DatasetError
from .extract import ExtractSpec, extract


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="extract", description=__doc__)
    p.add_argument("--root", required=True, help="dataset root (class directories inside)")
    p.add_argument("--out", required=True, help="output archive directory")
    p.add_argument("--classes", nargs="*", default=None, help="restrict to these classes")
    p.add_argument("--resize", type=int, nargs=2, default=(256, 256), metavar=("W", "H"))
    p.add_argument("--backbone", default="wide_resnet50_2")
    p.add_argument("--no-pretrained", dest="pretrained", action="store_false",
                   help="use random weights (offline smoke runs)")
    p.add_argument("--raw-stages", action="store_true",
                   help="also emit unaggregated stage maps per record")
    p.add_argument("--batch-size", type=int, default=8)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = ExtractSpec(
        root=args.root,
        out=args.out,
        resize=tuple(args.resize),
        backbone=args.backbone,
        pretrained=args.pretrained,
        raw_stages=args.raw_stages,
        classes=tuple(args.classes) if args.classes else None,
        batch_size=args.batch_size,
    )
    try:
        manifest = extract(spec)
    except (DatasetError, ValueError) as e:
        print(f"error: validation: {e}", file=sys.stderr)
        return 3
    except (RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    print(f"wrote {manifest}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
