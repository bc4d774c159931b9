"""Linear forward map for multi-scale observations.

Measurements are y = H x + v.  H stacks selector rows (one per point
station) above averaging rows (one per rectangular cell block); v is
zero-mean Gaussian with diagonal covariance, variance 0.01 m^2 for point
measurements and 0.001 m^2 for cell averages by default.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .grid import Field, GridCoord, GridSpec, flatten_index
from .rngs import as_generator

POINT_NOISE_VAR = 0.01
AVERAGE_NOISE_VAR = 0.001


@dataclass(frozen=True)
class CellBlock:
    """Inclusive rectangle of grid indices [i0..i1] x [j0..j1]."""

    i0: int
    j0: int
    i1: int
    j1: int

    def __post_init__(self):
        if self.i1 < self.i0 or self.j1 < self.j0:
            raise ValueError(f"empty cell block {self}")

    @property
    def size(self) -> int:
        return (self.i1 - self.i0 + 1) * (self.j1 - self.j0 + 1)

    def indices(self, grid: GridSpec) -> np.ndarray:
        if self.i0 < 0 or self.j0 < 0 or self.i1 >= grid.rows or self.j1 >= grid.cols:
            raise ValueError(f"cell block {self} outside {grid.rows}x{grid.cols} grid")
        ii, jj = np.meshgrid(
            np.arange(self.i0, self.i1 + 1), np.arange(self.j0, self.j1 + 1),
            indexing="ij",
        )
        return (ii * grid.cols + jj).ravel()


@dataclass(frozen=True)
class CellPartition:
    """Disjoint cell blocks that exactly tile a sub-rectangle of the grid."""

    blocks: tuple[CellBlock, ...]

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if not self.blocks:
            raise ValueError("partition needs at least one block")

    def validate(self, grid: GridSpec) -> None:
        seen = np.zeros(grid.n, dtype=bool)
        for block in self.blocks:
            idx = block.indices(grid)
            if seen[idx].any():
                raise ValueError(f"cell blocks overlap at {block}")
            seen[idx] = True
        # union must be exactly the bounding sub-rectangle
        i0 = min(b.i0 for b in self.blocks)
        i1 = max(b.i1 for b in self.blocks)
        j0 = min(b.j0 for b in self.blocks)
        j1 = max(b.j1 for b in self.blocks)
        covered = int(seen.sum())
        if covered != (i1 - i0 + 1) * (j1 - j0 + 1):
            raise ValueError("cell blocks do not tile a sub-rectangle")


@dataclass(frozen=True)
class ObservationModel:
    """Stacked forward map H (point rows first) with diagonal base noise."""

    grid: GridSpec
    h: np.ndarray          # (m, n)
    r0_diag: np.ndarray    # (m,) base noise variances
    n_point: int           # number of point rows; the rest are averages

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.float64)
        r0 = np.asarray(self.r0_diag, dtype=np.float64).reshape(-1)
        if h.ndim != 2 or h.shape[1] != self.grid.n:
            raise ValueError(f"H must be (m, {self.grid.n}), got {h.shape}")
        if r0.shape != (h.shape[0],):
            raise ValueError("noise diagonal length must match measurement count")
        if h.shape[0] and np.any(r0 <= 0):
            raise ValueError("noise variances must be strictly positive")
        if not 0 <= self.n_point <= h.shape[0]:
            raise ValueError("invalid point-row count")
        h = h.copy()
        h.flags.writeable = False
        r0 = r0.copy()
        r0.flags.writeable = False
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "r0_diag", r0)

    @property
    def m(self) -> int:
        return self.h.shape[0]

    @property
    def n_average(self) -> int:
        return self.m - self.n_point

    def noise_diag(self, noise_log_scale: float = 0.0) -> np.ndarray:
        """Diagonal of R = 10**noise_log_scale * R0."""
        return (10.0 ** noise_log_scale) * self.r0_diag


def build_point_rows(stations: Sequence[GridCoord], grid: GridSpec) -> np.ndarray:
    """One selector row per station, in station order."""
    stations = [GridCoord(*s) for s in stations]
    if len(set(stations)) != len(stations):
        raise ValueError("duplicate point stations")
    rows = np.zeros((len(stations), grid.n))
    for k, coord in enumerate(stations):
        rows[k, flatten_index(coord, grid)] = 1.0
    return rows


def build_average_rows(partition: CellPartition, grid: GridSpec) -> np.ndarray:
    """One equal-weight averaging row per block; each row sums to 1."""
    partition.validate(grid)
    rows = np.zeros((len(partition.blocks), grid.n))
    for k, block in enumerate(partition.blocks):
        idx = block.indices(grid)
        rows[k, idx] = 1.0 / idx.size
    return rows


def build_observation_model(
    stations: Sequence[GridCoord],
    partition: CellPartition | None,
    grid: GridSpec,
    point_var: float = POINT_NOISE_VAR,
    average_var: float = AVERAGE_NOISE_VAR,
) -> ObservationModel:
    point_rows = build_point_rows(stations, grid)
    if partition is None:
        h = point_rows
        n_avg = 0
    else:
        avg_rows = build_average_rows(partition, grid)
        h = np.vstack([point_rows, avg_rows]) if len(point_rows) else avg_rows
        n_avg = len(partition.blocks)
    r0 = np.concatenate([
        np.full(len(point_rows), point_var),
        np.full(n_avg, average_var),
    ])
    return ObservationModel(grid=grid, h=h, r0_diag=r0, n_point=len(point_rows))


def _lattice_indices(dim: int, count: int) -> list[int]:
    # equally spaced with half-spacing margins: floor((k + 0.5) * dim / count)
    return [int((k + 0.5) * dim // count) for k in range(count)]


def default_layout(
    grid: GridSpec,
    station_shape: tuple[int, int] = (5, 7),
    block_shape: tuple[int, int] = (4, 6),
) -> tuple[list[GridCoord], CellPartition]:
    """Standard survey layout: a 5x7 station lattice and a 4x6 cell partition.

    Stations sit on an evenly spaced index lattice with half-spacing margins.
    The 24 averaging cells tile the largest origin-anchored sub-rectangle
    whose side lengths divide evenly by the block counts; leftover strips at
    the far edges are unobserved by averages.
    """
    s_rows, s_cols = station_shape
    b_rows, b_cols = block_shape
    if grid.rows < 7 or grid.cols < 10:
        raise ValueError(
            f"default layout needs a grid of at least 7x10, got {grid.rows}x{grid.cols}"
        )
    stations = [
        GridCoord(i, j)
        for i in _lattice_indices(grid.rows, s_rows)
        for j in _lattice_indices(grid.cols, s_cols)
    ]
    span_i = (grid.rows // b_rows) * b_rows
    span_j = (grid.cols // b_cols) * b_cols
    di, dj = span_i // b_rows, span_j // b_cols
    blocks = [
        CellBlock(bi * di, bj * dj, (bi + 1) * di - 1, (bj + 1) * dj - 1)
        for bi in range(b_rows)
        for bj in range(b_cols)
    ]
    return stations, CellPartition(tuple(blocks))


def default_observation_model(grid: GridSpec) -> ObservationModel:
    stations, partition = default_layout(grid)
    return build_observation_model(stations, partition, grid)


def observe(model: ObservationModel, field: Field, noise_seed=None) -> np.ndarray:
    """Apply the forward map; add N(0, R0) noise when a seed/rng is given."""
    if field.grid != model.grid:
        raise ValueError("field grid does not match observation model")
    y = model.h @ field.values
    if noise_seed is not None:
        rng = as_generator(noise_seed)
        y = y + rng.standard_normal(model.m) * np.sqrt(model.r0_diag)
    return y


def write_observations(model: ObservationModel, y: np.ndarray, path) -> None:
    """Text format: header `m_p m_g`, then `type value variance` lines, P first."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape != (model.m,):
        raise ValueError(f"expected {model.m} measurements, got {y.shape}")
    lines = [f"{model.n_point} {model.n_average}"]
    for k in range(model.m):
        kind = "P" if k < model.n_point else "G"
        lines.append(f"{kind} {y[k]!r} {model.r0_diag[k]!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_observations(path) -> tuple[np.ndarray, np.ndarray, int]:
    """Returns (values, variances, n_point)."""
    lines = [ln for ln in Path(path).read_text().split("\n") if ln.strip()]
    n_point, n_avg = (int(tok) for tok in lines[0].split())
    values, variances = [], []
    for k, line in enumerate(lines[1 : 1 + n_point + n_avg]):
        kind, val, var = line.split()
        expected = "P" if k < n_point else "G"
        if kind != expected:
            raise ValueError(f"{path}: expected {expected} row at position {k}")
        values.append(float(val))
        variances.append(float(var))
    if len(values) != n_point + n_avg:
        raise ValueError(f"{path}: expected {n_point + n_avg} measurement lines")
    return np.array(values), np.array(variances), n_point


def write_layout(stations: Sequence[GridCoord], partition: CellPartition, path) -> None:
    """Text format: header `n_stations n_blocks`, `i j` lines, `i0 j0 i1 j1` lines."""
    lines = [f"{len(stations)} {len(partition.blocks)}"]
    lines += [f"{c.i} {c.j}" for c in (GridCoord(*s) for s in stations)]
    lines += [f"{b.i0} {b.j0} {b.i1} {b.j1}" for b in partition.blocks]
    Path(path).write_text("\n".join(lines) + "\n")


def read_layout(path) -> tuple[list[GridCoord], CellPartition]:
    lines = [ln for ln in Path(path).read_text().split("\n") if ln.strip()]
    n_st, n_bl = (int(tok) for tok in lines[0].split())
    stations = [
        GridCoord(*(int(tok) for tok in line.split())) for line in lines[1 : 1 + n_st]
    ]
    blocks = tuple(
        CellBlock(*(int(tok) for tok in line.split()))
        for line in lines[1 + n_st : 1 + n_st + n_bl]
    )
    return stations, CellPartition(blocks)
