"""Synthetic survey and training-data generation.

Training pairs are built by perturbing smooth base surveys with a
correlated Gaussian field (squared-exponential kernel, variance 0.15,
range 0.07 in normalized distance), optionally stamping a rectangular
depth jump (+12 m over 0.44 W x 0.44 L at a random corner), and observing
the result through the forward model with measurement noise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .forward import ObservationModel, observe
from .grid import Field, GridCoord, GridSpec, normalized_positions
from .linalg import cholesky_with_jitter
from .rngs import as_generator, substream

SQUARED_EXPONENTIAL = "squared-exponential"
EXPONENTIAL = "exponential"

DEFAULT_PERTURBATION_SCALE = 0.15
DEFAULT_PERTURBATION_RANGE = 0.07
DEFAULT_JUMP_HEIGHT = 12.0
DEFAULT_JUMP_FRAC = 0.44

MAX_DENSE_POINTS = 8192


@dataclass(frozen=True)
class KernelSpec:
    """Stationary kernel on the normalized anisotropic distance d."""

    family: str = SQUARED_EXPONENTIAL
    scale: float = DEFAULT_PERTURBATION_SCALE   # variance at d = 0, m^2
    range_r: float = DEFAULT_PERTURBATION_RANGE  # dimensionless

    def __post_init__(self):
        if self.family not in (SQUARED_EXPONENTIAL, EXPONENTIAL):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.scale <= 0 or self.range_r <= 0:
            raise ValueError("kernel scale and range must be positive")


def build_covariance(
    kernel: KernelSpec, grid: GridSpec, max_points: int = MAX_DENSE_POINTS
) -> np.ndarray:
    """Dense n x n kernel matrix over all grid points, row-major order.

    The matrix is exactly symmetric with diagonal equal to the kernel scale;
    jitter for factorization is applied downstream, not here.
    """
    if grid.n > max_points:
        raise ValueError(
            f"grid has {grid.n} points, over the dense covariance cap {max_points}"
        )
    pos = normalized_positions(grid)
    du = pos[:, 0:1] - pos[:, 0:1].T
    dv = pos[:, 1:2] - pos[:, 1:2].T
    d2 = du * du + dv * dv
    if kernel.family == SQUARED_EXPONENTIAL:
        cov = kernel.scale * np.exp(-d2 / kernel.range_r**2)
    else:
        cov = kernel.scale * np.exp(-np.sqrt(d2) / kernel.range_r)
    return symmetrized(cov)


def symmetrized(cov: np.ndarray) -> np.ndarray:
    out = 0.5 * (cov + cov.T)
    return out


def sample_gaussian_field(
    base: Field, kernel: KernelSpec, seed, chol: np.ndarray | None = None
) -> Field:
    """base + L u with u ~ N(0, I) and L the (jittered) Cholesky factor.

    Pass a precomputed factor via ``chol`` when drawing many samples.
    """
    if chol is None:
        cov = build_covariance(kernel, base.grid)
        chol, _ = cholesky_with_jitter(cov, scale=kernel.scale)
    rng = as_generator(seed)
    u = rng.standard_normal(base.grid.n)
    return base.with_values(base.values + chol @ u)


@dataclass(frozen=True)
class JumpSpec:
    """Constant-height rectangular anomaly anchored at a grid corner point."""

    height: float = DEFAULT_JUMP_HEIGHT
    frac_w: float = DEFAULT_JUMP_FRAC  # fraction of W (cross-shore extent)
    frac_l: float = DEFAULT_JUMP_FRAC  # fraction of L (along-shore extent)
    corner: GridCoord = GridCoord(0, 0)

    def __post_init__(self):
        if not (0 < self.frac_w <= 1 and 0 < self.frac_l <= 1):
            raise ValueError("jump fractions must be in (0, 1]")


def _span(frac: float, dim: int) -> int:
    # points covered by the half-open physical interval [u0, u0 + frac * extent);
    # the epsilon absorbs float artifacts when frac * (dim - 1) is integral
    return max(1, math.ceil(frac * (dim - 1) - 1e-9))


def jump_index_sets(jump: JumpSpec, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Row and column index ranges covered by the (clipped) jump rectangle."""
    if not grid.contains(jump.corner):
        raise ValueError(f"jump corner {jump.corner} outside grid")
    i0, j0 = jump.corner
    i1 = min(grid.rows, i0 + _span(jump.frac_w, grid.rows))
    j1 = min(grid.cols, j0 + _span(jump.frac_l, grid.cols))
    return np.arange(i0, i1), np.arange(j0, j1)


def add_jump(field: Field, jump: JumpSpec) -> Field:
    """Raise the jump rectangle by its height; clipping handles overflow."""
    rows, cols = jump_index_sets(jump, field.grid)
    mat = field.as_matrix().copy()
    mat[np.ix_(rows, cols)] += jump.height
    return field.with_values(mat.ravel())


@dataclass
class TrainingDataset:
    """Paired measurement vectors and reference fields."""

    grid: GridSpec
    inputs: np.ndarray        # (N, m)
    targets: np.ndarray       # (N, n)
    jumped: np.ndarray        # (N,) bool
    survey_index: np.ndarray  # (N,) int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.inputs) != len(self.targets):
            raise ValueError("inputs and targets must pair up")
        if self.targets.shape[1] != self.grid.n:
            raise ValueError("target length does not match grid")

    def __len__(self) -> int:
        return len(self.inputs)

    def target_field(self, index: int) -> Field:
        return Field(self.grid, self.targets[index])


def generate_dataset(
    surveys: list[Field],
    per_survey: int,
    jump_fraction: float,
    model: ObservationModel,
    kernel: KernelSpec | None = None,
    seed: int = 0,
    jump_height: float = DEFAULT_JUMP_HEIGHT,
    jump_frac_w: float = DEFAULT_JUMP_FRAC,
    jump_frac_l: float = DEFAULT_JUMP_FRAC,
) -> TrainingDataset:
    """per_survey noisy training pairs per base survey.

    The first round(jump_fraction * per_survey) samples of each survey carry
    a rectangular jump at a uniformly drawn corner.  Every pair uses its own
    RNG substream keyed by the global pair index, so the result is identical
    under any work partitioning.
    """
    if not surveys:
        raise ValueError("at least one base survey is required")
    if not 0.0 <= jump_fraction <= 1.0:
        raise ValueError("jump fraction must be in [0, 1]")
    grid = surveys[0].grid
    for s in surveys:
        if s.grid != grid:
            raise ValueError("all surveys must share one grid")
    if grid != model.grid:
        raise ValueError("observation model grid does not match surveys")
    kernel = kernel or KernelSpec()
    cov = build_covariance(kernel, grid)
    chol, _ = cholesky_with_jitter(cov, scale=kernel.scale)

    n_jump = round(jump_fraction * per_survey)
    total = per_survey * len(surveys)
    inputs = np.empty((total, model.m))
    targets = np.empty((total, grid.n))
    jumped = np.zeros(total, dtype=bool)
    survey_index = np.empty(total, dtype=np.int64)

    pair = 0
    for si, base in enumerate(surveys):
        for k in range(per_survey):
            rng = substream(seed, "pair", pair)
            sample = sample_gaussian_field(base, kernel, rng, chol=chol)
            if k < n_jump:
                corner = GridCoord(
                    int(rng.integers(grid.rows)), int(rng.integers(grid.cols))
                )
                sample = add_jump(
                    sample,
                    JumpSpec(jump_height, jump_frac_w, jump_frac_l, corner),
                )
                jumped[pair] = True
            inputs[pair] = observe(model, sample, noise_seed=rng)
            targets[pair] = sample.values
            survey_index[pair] = si
            pair += 1

    metadata = {
        "seed": int(seed),
        "per_survey": int(per_survey),
        "jump_fraction": float(jump_fraction),
        "jump_height": float(jump_height),
        "kernel_family": kernel.family,
        "kernel_scale": kernel.scale,
        "kernel_range": kernel.range_r,
    }
    return TrainingDataset(grid, inputs, targets, jumped, survey_index, metadata)


def make_base_surveys(
    grid: GridSpec, count: int, seed: int = 0
) -> list[Field]:
    """Smooth synthetic base profiles: planar beach slope plus low-frequency bars.

    Stand-ins for real monthly surveys so the pipeline runs end to end;
    substitute measured fields via the same file format where available.
    """
    ti = np.arange(grid.rows) / (grid.rows - 1)
    tj = np.arange(grid.cols) / (grid.cols - 1)
    tii, tjj = np.meshgrid(ti, tj, indexing="ij")
    surveys = []
    for k in range(count):
        rng = substream(seed, "base-survey", k)
        shallow = rng.uniform(0.0, 0.5)
        deep = rng.uniform(6.0, 9.0)
        depth = shallow + (deep - shallow) * tii
        for _ in range(rng.integers(1, 3)):
            amp = rng.uniform(0.3, 0.8)
            cycles = rng.uniform(1.0, 3.0)
            phase = rng.uniform(0.0, 2 * np.pi)
            mod_phase = rng.uniform(0.0, 2 * np.pi)
            bar = amp * np.sin(2 * np.pi * cycles * tii + phase)
            bar *= 1.0 + 0.3 * np.sin(2 * np.pi * tjj + mod_phase)
            depth = depth + bar
        surveys.append(Field(grid, depth.ravel()))
    return surveys


def mean_survey(surveys: list[Field]) -> Field:
    """Point-wise average, the default prior mean."""
    if not surveys:
        raise ValueError("no surveys to average")
    stacked = np.stack([s.values for s in surveys])
    return Field(surveys[0].grid, stacked.mean(axis=0))


def save_dataset_files(dataset: TrainingDataset, model: ObservationModel, outdir) -> None:
    """File-per-pair layout: fields/ and obs/ plus a manifest line per pair."""
    from .forward import write_observations
    from .grid import write_field

    outdir = Path(outdir)
    (outdir / "fields").mkdir(parents=True, exist_ok=True)
    (outdir / "obs").mkdir(parents=True, exist_ok=True)
    lines = ["index field obs jumped survey"]
    for k in range(len(dataset)):
        field_rel = f"fields/{k:06d}.txt"
        obs_rel = f"obs/{k:06d}.txt"
        write_field(dataset.target_field(k), outdir / field_rel)
        write_observations(model, dataset.inputs[k], outdir / obs_rel)
        lines.append(
            f"{k} {field_rel} {obs_rel} {int(dataset.jumped[k])} {dataset.survey_index[k]}"
        )
    (outdir / "manifest.txt").write_text("\n".join(lines) + "\n")


def load_dataset_files(outdir) -> TrainingDataset:
    from .forward import read_observations
    from .grid import read_field

    outdir = Path(outdir)
    lines = (outdir / "manifest.txt").read_text().strip().split("\n")[1:]
    inputs, targets, jumped, survey_index = [], [], [], []
    grid = None
    for line in lines:
        _, field_rel, obs_rel, jflag, sidx = line.split()
        fld = read_field(outdir / field_rel)
        grid = grid or fld.grid
        y, _, _ = read_observations(outdir / obs_rel)
        inputs.append(y)
        targets.append(fld.values)
        jumped.append(bool(int(jflag)))
        survey_index.append(int(sidx))
    if grid is None:
        raise ValueError(f"empty dataset manifest in {outdir}")
    return TrainingDataset(
        grid,
        np.array(inputs),
        np.array(targets),
        np.array(jumped, dtype=bool),
        np.array(survey_index, dtype=np.int64),
    )


_PACKED_MAGIC = b"BATHYDS1"


def save_dataset_packed(dataset: TrainingDataset, path) -> None:
    """Little-endian binary: magic, JSON header, then f8 inputs/targets."""
    header = {
        "count": len(dataset),
        "m": int(dataset.inputs.shape[1]),
        "rows": dataset.grid.rows,
        "cols": dataset.grid.cols,
        "width": dataset.grid.width,
        "length": dataset.grid.length,
        "metadata": dataset.metadata,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_PACKED_MAGIC)
        fh.write(np.int64(len(blob)).astype("<i8").tobytes())
        fh.write(blob)
        fh.write(np.ascontiguousarray(dataset.inputs, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(dataset.targets, dtype="<f8").tobytes())
        fh.write(dataset.jumped.astype("<u1").tobytes())
        fh.write(dataset.survey_index.astype("<i8").tobytes())


def load_dataset_packed(path) -> TrainingDataset:
    raw = Path(path).read_bytes()
    if raw[: len(_PACKED_MAGIC)] != _PACKED_MAGIC:
        raise ValueError(f"{path} is not a packed dataset")
    off = len(_PACKED_MAGIC)
    blob_len = int(np.frombuffer(raw, dtype="<i8", count=1, offset=off)[0])
    off += 8
    header = json.loads(raw[off : off + blob_len].decode("utf-8"))
    off += blob_len
    count, m = header["count"], header["m"]
    grid = GridSpec(header["rows"], header["cols"], header["width"], header["length"])
    inputs = np.frombuffer(raw, dtype="<f8", count=count * m, offset=off)
    off += inputs.nbytes
    targets = np.frombuffer(raw, dtype="<f8", count=count * grid.n, offset=off)
    off += targets.nbytes
    jumped = np.frombuffer(raw, dtype="<u1", count=count, offset=off)
    off += jumped.nbytes
    survey_index = np.frombuffer(raw, dtype="<i8", count=count, offset=off)
    return TrainingDataset(
        grid,
        inputs.reshape(count, m).astype(np.float64),
        targets.reshape(count, grid.n).astype(np.float64),
        jumped.astype(bool),
        survey_index.astype(np.int64),
        header["metadata"],
    )
