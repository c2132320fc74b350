"""render-figures: render a report manifest into static images."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import SchemaMismatchError, render_figures


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render-figures",
        description="Render experiment report figures (SVG/PNG)",
    )
    parser.add_argument("manifest", type=Path,
                        help="path to a manifest.json produced by the harness")
    parser.add_argument("--out", type=Path, required=True,
                        help="output directory for images")
    parser.add_argument("--format", default="svg,png",
                        help="comma-separated image formats (default svg,png)")
    args = parser.parse_args(argv)
    formats = tuple(f.strip() for f in args.format.split(",") if f.strip())
    try:
        rendered = render_figures(args.manifest, args.out, formats)
    except SchemaMismatchError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    for record in rendered:
        print(f"rendered {record.output} ({record.kind}): "
              + ", ".join(str(p) for p in record.paths))
    print(f"{len(rendered)} figure(s) written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
