"""Command-line surface: `extract images ...` and `extract classes ...`."""

from __future__ import annotations

import argparse
import sys

from .encoders import HISTOGRAM, EncoderError
from .extract import DEFAULT_TEMPLATE, extract_classes, extract_images


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> _Parser:
    parser = _Parser(prog="extract",
                     description="Encode images/class names into .lluf files")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("images", help="encode an image folder (one subfolder per class)")
    p.add_argument("root", help="folder with one subfolder per class")
    p.add_argument("--model", default=HISTOGRAM,
                   help=f"encoder name (default: {HISTOGRAM}; any "
                        "sentence-transformers model otherwise)")
    p.add_argument("--out", required=True, help="output .lluf path (kind 0)")

    p = sub.add_parser("classes", help="encode a class-name list")
    p.add_argument("names", help="text file, one class name per line")
    p.add_argument("--model", default=HISTOGRAM)
    p.add_argument("--template", default=DEFAULT_TEMPLATE,
                   help=f"prompt template (default: {DEFAULT_TEMPLATE!r})")
    p.add_argument("--out", required=True, help="output .lluf path (kind 1)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "images":
            extract_images(args.root, args.model, args.out)
        else:
            with open(args.names) as fh:
                names = [line.strip() for line in fh if line.strip()]
            extract_classes(names, args.template, args.model, args.out)
    except (EncoderError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
