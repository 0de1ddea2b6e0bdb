"""Command-line front end: `hypergrad-fig <kind> --in <csv...> --out <png>`.

Exit codes: 0 on success, 1 on any deliberate failure (bad arguments,
missing files, schema mismatches).  The written path is printed to stdout.
"""

import argparse
import sys

from .errors import FigureError
from .render import KINDS, FigureSpec, render


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse's exits through our own code
        raise FigureError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="hypergrad-fig", description=__doc__)
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        metavar="CSV", help="input CSV file(s)")
    parser.add_argument("--out", required=True, metavar="PNG",
                        help="output image path")
    parser.add_argument("--title", default="")
    parser.add_argument("--x-label", default="")
    parser.add_argument("--y-label", default="")
    parser.add_argument("--log-x", action="store_true")
    parser.add_argument("--log-y", action="store_true")
    parser.add_argument("--dpi", type=int, default=150)
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        spec = FigureSpec(
            inputs=tuple(args.inputs),
            kind=args.kind,
            out=args.out,
            title=args.title,
            x_label=args.x_label,
            y_label=args.y_label,
            log_x=args.log_x,
            log_y=args.log_y,
            dpi=args.dpi,
        )
        print(render(spec))
        return 0
    except FigureError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
