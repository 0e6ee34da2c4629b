"""Command line: plot <kind> --in CSV[,CSV...] --out IMG."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import FIGURE_KINDS, FigureRequest, SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plot",
                                     description="render a figure from fvsim CSV outputs")
    parser.add_argument("kind", choices=FIGURE_KINDS)
    parser.add_argument("--in", dest="inputs", required=True,
                        help="comma-separated input CSV paths")
    parser.add_argument("--out", dest="output", required=True, help="output image path")
    args = parser.parse_args(argv)

    req = FigureRequest(kind=args.kind,
                        inputs=tuple(Path(p) for p in args.inputs.split(",")),
                        output=Path(args.output))
    try:
        meta = render(req)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for key, value in sorted(meta.items()):
        print(f"{key}: {value}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
