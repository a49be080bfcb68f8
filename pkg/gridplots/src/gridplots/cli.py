"""Command line wrapper: one subcommand, ``render``.

Exit codes: 0 on success, 2 for schema or argument problems.
"""

from __future__ import annotations

import argparse
import sys

from .grid import GridSchemaError
from .heatmap import HeatmapSpec, render_heatmap


def _parse_region(text: str) -> tuple[int, int]:
    try:
        u_max, l_max = (int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected U_MAX,L_MAX") from None
    return u_max, l_max


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridplots")
    sub = parser.add_subparsers(dest="command", required=True)
    render = sub.add_parser("render", help="render a grid CSV to PNG and SVG")
    render.add_argument("--in", dest="input_csv", required=True, help="grid CSV path")
    render.add_argument("--out", dest="output_path", required=True,
                        help="output path; .png and .svg are written")
    render.add_argument("--label", default="mean edit distance",
                        help="colorbar label for the metric")
    render.add_argument("--train-box", type=_parse_region, default=None,
                        metavar="U_MAX,L_MAX", help="training-region box bounds")
    render.add_argument("--vmin", type=float, default=None)
    render.add_argument("--vmax", type=float, default=None)
    render.add_argument("--brightness-by-count", action="store_true",
                        help="fade cells with fewer samples toward white")
    render.add_argument("--colormap", default="viridis")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = HeatmapSpec(
        input_csv=args.input_csv,
        output_path=args.output_path,
        metric_label=args.label,
        training_region=args.train_box,
        vmin=args.vmin,
        vmax=args.vmax,
        brightness_by_count=args.brightness_by_count,
        colormap=args.colormap,
    )
    try:
        png_path, svg_path = render_heatmap(spec)
    except (GridSchemaError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(png_path)
    print(svg_path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
