"""Grid geometry and depth fields.

The domain is an abstract rectangle of physical size W (cross-shore) by
L (along-shore), discretized by ``rows`` x ``cols`` grid points whose rows
run cross-shore and whose columns run along-shore.  Grid point (i, j) sits
at the physical position (i/(rows-1) * W, j/(cols-1) * L), so the domain
corners lie on the grid.  Depth values are stored row-major as a flat
float64 vector of length n = rows * cols.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np


class GridCoord(NamedTuple):
    i: int  # row index (cross-shore)
    j: int  # col index (along-shore)


@dataclass(frozen=True)
class GridSpec:
    """Discretization of the rectangular domain."""

    rows: int
    cols: int
    width: float   # cross-shore extent W, meters
    length: float  # along-shore extent L, meters

    def __post_init__(self):
        if self.rows < 2 or self.cols < 2:
            raise ValueError(f"grid must be at least 2x2, got {self.rows}x{self.cols}")
        if self.width <= 0 or self.length <= 0:
            raise ValueError("grid extents must be positive")

    @property
    def n(self) -> int:
        return self.rows * self.cols

    def contains(self, coord: GridCoord) -> bool:
        return 0 <= coord.i < self.rows and 0 <= coord.j < self.cols

    def position(self, coord: GridCoord) -> tuple[float, float]:
        """Physical (cross-shore, along-shore) position of a grid point, meters."""
        if not self.contains(coord):
            raise IndexError(f"coordinate {coord} outside {self.rows}x{self.cols} grid")
        u = coord.i / (self.rows - 1) * self.width
        v = coord.j / (self.cols - 1) * self.length
        return u, v

    def coords(self) -> list[GridCoord]:
        """All grid coordinates in row-major order."""
        return [GridCoord(i, j) for i in range(self.rows) for j in range(self.cols)]


def flatten_index(coord: GridCoord, grid: GridSpec) -> int:
    """Row-major vector index of a grid coordinate."""
    if not grid.contains(coord):
        raise IndexError(f"coordinate {coord} outside {grid.rows}x{grid.cols} grid")
    return coord.i * grid.cols + coord.j


def unflatten_index(index: int, grid: GridSpec) -> GridCoord:
    """Inverse of :func:`flatten_index`."""
    if not 0 <= index < grid.n:
        raise IndexError(f"index {index} outside field of length {grid.n}")
    return GridCoord(index // grid.cols, index % grid.cols)


def normalized_distance(a: GridCoord, b: GridCoord, grid: GridSpec) -> float:
    """Dimensionless anisotropic distance between two grid points.

    Along-shore offsets are normalized by the domain length L and
    cross-shore offsets by the width W, so opposite domain corners are
    sqrt(2) apart regardless of the aspect ratio.
    """
    ua, va = grid.position(a)
    ub, vb = grid.position(b)
    return float(np.hypot((va - vb) / grid.length, (ua - ub) / grid.width))


def normalized_positions(grid: GridSpec) -> np.ndarray:
    """(n, 2) array of (cross-shore/W, along-shore/L) fractions, row-major.

    Vectorized companion of :func:`normalized_distance`: the distance between
    flattened points p and q is the euclidean distance between rows p and q.
    """
    ti = np.arange(grid.rows, dtype=np.float64) / (grid.rows - 1)
    tj = np.arange(grid.cols, dtype=np.float64) / (grid.cols - 1)
    uu, vv = np.meshgrid(ti, tj, indexing="ij")
    return np.column_stack([uu.ravel(), vv.ravel()])


@dataclass(frozen=True)
class Field:
    """Depth values (meters) on a grid, flattened row-major."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if values.shape != (self.grid.n,):
            raise ValueError(
                f"field has {values.size} values, grid needs {self.grid.n}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def as_matrix(self) -> np.ndarray:
        """(rows, cols) read-only view."""
        return self.values.reshape(self.grid.rows, self.grid.cols)

    def at(self, coord: GridCoord) -> float:
        return float(self.values[flatten_index(coord, self.grid)])

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values)


def constant_field(grid: GridSpec, value: float) -> Field:
    return Field(grid, np.full(grid.n, float(value)))


def write_field(field: Field, path) -> None:
    """Text format: header `rows cols width length`, then row-major values."""
    g = field.grid
    lines = [f"{g.rows} {g.cols} {g.width!r} {g.length!r}"]
    mat = field.as_matrix()
    for i in range(g.rows):
        lines.append(" ".join(repr(v) for v in mat[i]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_field(path) -> Field:
    text = Path(path).read_text().split("\n")
    header = text[0].split()
    if len(header) != 4:
        raise ValueError(f"bad field header in {path}: {text[0]!r}")
    rows, cols = int(header[0]), int(header[1])
    grid = GridSpec(rows, cols, float(header[2]), float(header[3]))
    values = []
    for line in text[1:]:
        if line.strip():
            values.extend(float(tok) for tok in line.split())
    if len(values) != grid.n:
        raise ValueError(f"{path}: expected {grid.n} values, found {len(values)}")
    return Field(grid, np.array(values))
