"""Annotated heatmaps over (unique-count, length) cells.

Feasible cells are colored by the metric; the infeasible triangle
(more unique tokens than positions) is hatched; feasible cells missing
from the CSV are flat gray, visibly different from any colored value.
A box marks the training region, and cell brightness optionally
encodes the per-cell sample count.

Rendering avoids global pyplot state and pins the SVG hash salt, so a
fixed spec produces byte-identical PNG and SVG files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib
import numpy as np
from matplotlib import colormaps
from matplotlib.cm import ScalarMappable
from matplotlib.colors import Normalize, to_rgb
from matplotlib.figure import Figure
from matplotlib.patches import Rectangle

from .grid import Grid, read_grid_csv

ABSENT_COLOR = "#d4d4d4"
HATCH_EDGE = "#9c9c9c"
BOX_COLOR = "#1a7f32"
CELL_INCHES = 0.38
DPI = 100.0
# fraction of the full color kept for the smallest sample count
BRIGHTNESS_FLOOR = 0.3

_RC = {
    "svg.hashsalt": "gridplots",
    "svg.fonttype": "path",
    "font.family": "DejaVu Sans",
}


@dataclass(frozen=True)
class HeatmapSpec:
    """Everything needed to turn one grid CSV into one pair of images."""

    input_csv: str | Path
    output_path: str | Path
    metric_label: str = "mean edit distance"
    training_region: tuple[int, int] | None = None  # (u_max, l_max)
    vmin: float | None = None
    vmax: float | None = None
    brightness_by_count: bool = False
    colormap: str = "viridis"


def _cell_color(mean, count, norm, cmap, max_count, by_count):
    rgb = np.array(to_rgb(cmap(norm(mean))))
    if by_count and max_count > 0:
        keep = BRIGHTNESS_FLOOR + (1.0 - BRIGHTNESS_FLOOR) * (count / max_count)
        rgb = 1.0 - (1.0 - rgb) * keep  # fade toward white, never past the floor
    return tuple(rgb)


def build_heatmap(spec: HeatmapSpec, grid: Grid | None = None):
    """Build the figure; returns (figure, info) without touching disk.

    ``info`` maps cell roles to coordinates so that structural tests can
    inspect what was drawn: keys ``colored``, ``absent``, ``infeasible``,
    plus the value normalization and the grid itself.
    """
    if grid is None:
        grid = read_grid_csv(spec.input_csv)
    max_u, max_l = grid.max_u, grid.max_l
    if spec.training_region is not None:
        box_u, box_l = spec.training_region
        if not (1 <= box_u <= max_u and 1 <= box_l <= max_l):
            raise ValueError(
                f"training region {spec.training_region} outside grid "
                f"extents ({max_u}, {max_l})"
            )

    values = [mean for mean, _ in grid.cells.values()]
    vmin = spec.vmin if spec.vmin is not None else min(0.0, min(values))
    vmax = spec.vmax if spec.vmax is not None else max(values)
    if vmax <= vmin:
        vmax = vmin + 1.0
    norm = Normalize(vmin=vmin, vmax=vmax)
    cmap = colormaps[spec.colormap]

    fig = Figure(
        figsize=(max_l * CELL_INCHES + 2.2, max_u * CELL_INCHES + 1.2), dpi=DPI
    )
    ax = fig.add_subplot()
    info = {"grid": grid, "norm": norm, "colored": {}, "absent": [], "infeasible": []}
    for u in range(1, max_u + 1):
        for l in range(1, max_l + 1):
            anchor = (l - 0.5, u - 0.5)
            if u > l:
                rect = Rectangle(
                    anchor, 1.0, 1.0, facecolor="white",
                    hatch="///", edgecolor=HATCH_EDGE, linewidth=0.0,
                )
                info["infeasible"].append((u, l))
            elif (u, l) in grid.cells:
                mean, count = grid.cells[(u, l)]
                color = _cell_color(
                    mean, count, norm, cmap, grid.max_count,
                    spec.brightness_by_count,
                )
                rect = Rectangle(anchor, 1.0, 1.0, facecolor=color, linewidth=0.0)
                info["colored"][(u, l)] = color
            else:
                rect = Rectangle(
                    anchor, 1.0, 1.0, facecolor=ABSENT_COLOR, linewidth=0.0
                )
                info["absent"].append((u, l))
            rect.set_gid(f"cell-{u}-{l}")
            ax.add_patch(rect)

    if spec.training_region is not None:
        box_u, box_l = spec.training_region
        box = Rectangle(
            (0.5, 0.5), box_l, box_u, fill=False,
            edgecolor=BOX_COLOR, linewidth=2.0,
        )
        box.set_gid("training-box")
        ax.add_patch(box)

    ax.set_xlim(0.5, max_l + 0.5)
    ax.set_ylim(max_u + 0.5, 0.5)  # unique count grows downward
    ax.set_xticks(range(1, max_l + 1))
    ax.set_yticks(range(1, max_u + 1))
    ax.set_xlabel("sequence length")
    ax.set_ylabel("unique tokens")
    ax.set_aspect("equal")
    fig.colorbar(ScalarMappable(norm=norm, cmap=cmap), ax=ax, label=spec.metric_label)
    return fig, info


def render_heatmap(spec: HeatmapSpec) -> tuple[Path, Path]:
    """Render ``spec`` to ``<output>.png`` and ``<output>.svg``.

    The output path's extension, if any, is replaced; both files are
    always written.  Returns the two paths.
    """
    out = Path(spec.output_path)
    if out.suffix.lower() in (".png", ".svg"):
        out = out.with_suffix("")
    png_path = out.with_suffix(".png")
    svg_path = out.with_suffix(".svg")
    with matplotlib.rc_context(_RC):
        fig, _ = build_heatmap(spec)
        # strip the writer's version stamp and date so bytes are stable
        fig.savefig(png_path, format="png", metadata={"Software": None})
        fig.savefig(svg_path, format="svg", metadata={"Date": None})
    return png_path, svg_path
