"""Command line entry point: figkit <manifest.json> --fig <id> --out <path>."""

from __future__ import annotations

import argparse
import sys

from .errors import FigkitError
from .figures import FIGURE_IDS, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="figkit",
        description="Render a figure from a bohmdiff run manifest.")
    parser.add_argument("manifest", help="path to the run's manifest.json")
    parser.add_argument("--fig", required=True, choices=FIGURE_IDS,
                        help="figure id to render")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--style", default=None,
                        help="optional matplotlib style file")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        render(args.manifest, args.fig, args.out, style=args.style)
    except FigkitError as exc:
        print(f"figkit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # internal error
        print(f"figkit: internal error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
