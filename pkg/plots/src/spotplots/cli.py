"""Command line: `plots render --csv results.csv --kind <kind> --regime <r> --out <img>`."""

from __future__ import annotations

import argparse
import sys

from .contract import ContractError
from .render import CHART_KINDS, REGIMES, FigureSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plots", description="render sweep result charts")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one chart from a results CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--kind", required=True, choices=CHART_KINDS)
    p.add_argument("--regime", default="all", choices=REGIMES)
    p.add_argument("--policy", action="append", default=None,
                   help="restrict to a policy (repeatable)")
    p.add_argument("--out", required=True)
    args = parser.parse_args(argv)

    spec = FigureSpec(csv_path=args.csv, kind=args.kind, regime=args.regime,
                      policies=tuple(args.policy) if args.policy else (),
                      out_path=args.out)
    try:
        path = render(spec)
    except (ContractError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
