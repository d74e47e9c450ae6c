"""Command line for figure rendering: render --kind --in --overlay --out."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import KINDS, FigureSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="billiard-figures",
                                description="Render plots from simulator CSVs")
    p.add_argument("command", choices=["render"])
    p.add_argument("--kind", required=True, choices=list(KINDS))
    p.add_argument("--in", dest="inputs", required=True, nargs="+",
                   metavar="CSV", help="input CSV file(s)")
    p.add_argument("--overlay", help="resonance overlay CSV (scan only)")
    p.add_argument("--out", required=True, help="output image basename")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    missing = [p for p in args.inputs if not Path(p).exists()]
    if args.overlay and not Path(args.overlay).exists():
        missing.append(args.overlay)
    if missing:
        print(f"billiard-figures: input not found: {', '.join(missing)}",
              file=sys.stderr)
        return 2
    spec = FigureSpec(kind=args.kind,
                      inputs=[Path(p) for p in args.inputs],
                      overlay=Path(args.overlay) if args.overlay else None,
                      output=Path(args.out))
    try:
        outputs = render(spec)
    except SchemaError as exc:
        print(f"billiard-figures: {exc}", file=sys.stderr)
        return 1
    print("wrote " + ", ".join(str(o) for o in outputs))
    return 0


if __name__ == "__main__":
    sys.exit(main())
