"""Reader for the evaluation-grid CSV interchange format.

The schema is four columns with header ``u,l,mean,count``: unique-token
count, sequence length, mean metric value, sample count.  Leading lines
starting with ``#`` are self-declared comments (timestamps) and are
skipped.  Cells absent from the file are absent from the grid; absence
is meaningful and distinct from a zero value.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

EXPECTED_HEADER = ["u", "l", "mean", "count"]


class GridSchemaError(Exception):
    """The file does not follow the grid CSV schema."""


@dataclass(frozen=True)
class Grid:
    cells: dict[tuple[int, int], tuple[float, int]]

    @property
    def max_u(self) -> int:
        return max(u for u, _ in self.cells)

    @property
    def max_l(self) -> int:
        return max(l for _, l in self.cells)

    @property
    def max_count(self) -> int:
        return max(count for _, count in self.cells.values())


def read_grid_csv(path: str | Path) -> Grid:
    path = Path(path)
    if not path.exists():
        raise GridSchemaError(f"no such file: {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader, None)
    if header != EXPECTED_HEADER:
        raise GridSchemaError(
            f"expected header {','.join(EXPECTED_HEADER)}, got {header}"
        )
    cells: dict[tuple[int, int], tuple[float, int]] = {}
    for lineno, row in enumerate(reader, start=2):
        if len(row) != 4:
            raise GridSchemaError(f"line {lineno}: expected 4 columns, got {len(row)}")
        try:
            u, l, mean, count = int(row[0]), int(row[1]), float(row[2]), int(row[3])
        except ValueError as exc:
            raise GridSchemaError(f"line {lineno}: {exc}") from exc
        if u < 1 or l < 1 or count < 0:
            raise GridSchemaError(f"line {lineno}: out-of-range cell ({u}, {l})")
        if u > l:
            raise GridSchemaError(
                f"line {lineno}: infeasible cell ({u}, {l}): u exceeds l"
            )
        if (u, l) in cells:
            raise GridSchemaError(f"line {lineno}: duplicate cell ({u}, {l})")
        cells[(u, l)] = (mean, count)
    if not cells:
        raise GridSchemaError(f"no cells in {path}")
    return Grid(cells)
