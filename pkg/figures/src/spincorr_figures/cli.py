"""Command-line entry point: ``figures <kind> <input.csv> [...] -o out.png``."""
from __future__ import annotations

import argparse
import sys

from .data import SchemaError
from .render import FIGURE_KINDS, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="figures",
        description="render spincorr CSV outputs as figures")
    parser.add_argument("kind", choices=FIGURE_KINDS)
    parser.add_argument("inputs", nargs="+", metavar="input.csv")
    parser.add_argument("-o", "--output", required=True,
                        help="output image path")
    args = parser.parse_args(sys.argv[1:] if argv is None else argv)
    try:
        result = render(args.kind, args.inputs, args.output)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    details = " ".join(f"{k}={v}" for k, v in result.annotations.items())
    print(f"wrote {result.path} ({result.kind}) {details}".rstrip())
    return 0


if __name__ == "__main__":
    sys.exit(main())
