"""Heatmap figures for evaluation grids stored in the u,l,mean,count CSV schema."""

from .grid import Grid, GridSchemaError, read_grid_csv
from .heatmap import HeatmapSpec, build_heatmap, render_heatmap

__all__ = [
    "Grid",
    "GridSchemaError",
    "read_grid_csv",
    "HeatmapSpec",
    "build_heatmap",
    "render_heatmap",
]
