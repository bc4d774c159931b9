"""Closed-form linear-Gaussian inference on depth fields.

With prior x ~ N(mu, Q), noise v ~ N(0, R), and measurements y = H x + v,
the posterior is Gaussian with

    mean        mu + G (y - H mu)
    covariance  (Q^-1 + H^T R^-1 H)^-1
    gain        G = (Q^-1 + H^T R^-1 H)^-1 H^T R^-1
                  = Q H^T (H Q H^T + R)^-1

Q = 10**log_scale * Q0 and R = 10**noise_log_scale * R0 are scaled copies
of fixed base matrices; the two log10 scales are picked by maximizing the
marginal likelihood of y over a uniform grid.  Everything is solved through
Cholesky factorizations of SPD systems; no explicit inverses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .forward import ObservationModel
from .grid import Field, GridSpec
from .linalg import FactorizationError, chol_solve, cholesky_with_jitter, symmetrize
from .rngs import substream
from .synthetic import EXPONENTIAL, KernelSpec, build_covariance

DEFAULT_PRIOR_KERNEL = KernelSpec(family=EXPONENTIAL, scale=1.0, range_r=0.75)
# log10 scale grid bracketing unit scaling by two decades each way, step 0.25
DEFAULT_LOG_SCALE_GRID = tuple(np.arange(-8, 5) * 0.25)


@dataclass(frozen=True)
class GaussianPrior:
    """Prior mean plus a unit-scale base covariance and its log10 multiplier."""

    mean: Field
    q0: np.ndarray
    log_scale: float = 0.0

    def __post_init__(self):
        q0 = np.asarray(self.q0, dtype=np.float64)
        if q0.shape != (self.mean.grid.n, self.mean.grid.n):
            raise ValueError(
                f"base covariance must be {self.mean.grid.n} square, got {q0.shape}"
            )
        q0 = q0.copy()
        q0.flags.writeable = False
        object.__setattr__(self, "q0", q0)

    @property
    def grid(self) -> GridSpec:
        return self.mean.grid

    @property
    def covariance(self) -> np.ndarray:
        return (10.0 ** self.log_scale) * self.q0

    def with_log_scale(self, log_scale: float) -> "GaussianPrior":
        return GaussianPrior(self.mean, self.q0, log_scale)

    def with_mean(self, mean: Field) -> "GaussianPrior":
        return GaussianPrior(mean, self.q0, self.log_scale)


def build_prior(
    mean: Field, kernel: KernelSpec = DEFAULT_PRIOR_KERNEL, log_scale: float = 0.0
) -> GaussianPrior:
    return GaussianPrior(mean, build_covariance(kernel, mean.grid), log_scale)


@dataclass(frozen=True)
class PosteriorGaussian:
    """First two posterior moments plus the gain that produced them."""

    mean: Field
    covariance: np.ndarray
    gain: np.ndarray

    @property
    def grid(self) -> GridSpec:
        return self.mean.grid

    def std(self) -> np.ndarray:
        return np.sqrt(np.maximum(np.diag(self.covariance), 0.0))


# -- gain and posterior moments on raw matrices ------------------------------
# Two independent algebraic routes are kept on purpose; tests cross-check them.


def gain_data_space(q: np.ndarray, h: np.ndarray, r_diag: np.ndarray) -> np.ndarray:
    """G = Q H^T (H Q H^T + R)^-1 via Cholesky of the m x m data-space system."""
    m, n = h.shape
    if m == 0:
        return np.zeros((n, 0))
    s = h @ q @ h.T + np.diag(r_diag)
    chol, _ = cholesky_with_jitter(symmetrize(s))
    return chol_solve(chol, h @ q).T


def gain_information(q: np.ndarray, h: np.ndarray, r_diag: np.ndarray) -> np.ndarray:
    """G = (Q^-1 + H^T R^-1 H)^-1 H^T R^-1 via Cholesky of the n x n system."""
    m, n = h.shape
    if m == 0:
        return np.zeros((n, 0))
    chol_q, _ = cholesky_with_jitter(q)
    q_inv = chol_solve(chol_q, np.eye(n))
    a = symmetrize(q_inv + h.T @ (h / r_diag[:, None]))
    chol_a, _ = cholesky_with_jitter(a)
    return chol_solve(chol_a, h.T / r_diag)


def posterior_covariance_matrices(
    q: np.ndarray, h: np.ndarray, r_diag: np.ndarray, method: str = "identity"
) -> np.ndarray:
    """Posterior covariance, either as Q - G H Q or by the information form."""
    if method == "identity":
        gain = gain_data_space(q, h, r_diag)
        return symmetrize(q - gain @ (h @ q))
    if method == "information":
        if h.shape[0] == 0:
            return q.copy()
        chol_q, _ = cholesky_with_jitter(q)
        q_inv = chol_solve(chol_q, np.eye(q.shape[0]))
        a = symmetrize(q_inv + h.T @ (h / r_diag[:, None]))
        chol_a, _ = cholesky_with_jitter(a)
        return symmetrize(chol_solve(chol_a, np.eye(q.shape[0])))
    raise ValueError(f"unknown method {method!r}")


# -- model-level operations ---------------------------------------------------


def compute_gain(
    prior: GaussianPrior,
    model: ObservationModel,
    noise_log_scale: float = 0.0,
    method: str = "data-space",
) -> np.ndarray:
    q = prior.covariance
    r = model.noise_diag(noise_log_scale)
    if method == "data-space":
        return gain_data_space(q, model.h, r)
    if method == "information":
        return gain_information(q, model.h, r)
    raise ValueError(f"unknown method {method!r}")


def posterior_mean(
    prior: GaussianPrior,
    model: ObservationModel,
    noise_log_scale: float,
    y: np.ndarray,
    gain: np.ndarray | None = None,
) -> Field:
    """mu + G (y - H mu)."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape != (model.m,):
        raise ValueError(f"expected {model.m} measurements, got {y.shape}")
    if gain is None:
        gain = compute_gain(prior, model, noise_log_scale)
    innovation = y - model.h @ prior.mean.values
    return prior.mean.with_values(prior.mean.values + gain @ innovation)


def posterior_covariance(
    prior: GaussianPrior,
    model: ObservationModel,
    noise_log_scale: float = 0.0,
    method: str = "identity",
) -> np.ndarray:
    return posterior_covariance_matrices(
        prior.covariance, model.h, model.noise_diag(noise_log_scale), method
    )


def compute_posterior(
    prior: GaussianPrior,
    model: ObservationModel,
    noise_log_scale: float,
    y: np.ndarray,
) -> PosteriorGaussian:
    gain = compute_gain(prior, model, noise_log_scale)
    mean = posterior_mean(prior, model, noise_log_scale, y, gain=gain)
    cov = symmetrize(prior.covariance - gain @ (model.h @ prior.covariance))
    return PosteriorGaussian(mean=mean, covariance=cov, gain=gain)


# -- marginal likelihood ------------------------------------------------------


def log_evidence_matrices(
    hq0ht: np.ndarray,
    r0_diag: np.ndarray,
    residual: np.ndarray,
    prior_log_scale: float,
    noise_log_scale: float,
) -> float:
    """log N(y; H mu, 10**t1 H Q0 H^T + 10**t2 R0) from precomputed pieces."""
    m = residual.size
    s = (10.0 ** prior_log_scale) * hq0ht + np.diag(
        (10.0 ** noise_log_scale) * r0_diag
    )
    try:
        chol = np.linalg.cholesky(symmetrize(s))
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"marginal covariance not SPD: {exc}") from exc
    quad = float(residual @ chol_solve(chol, residual))
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return -0.5 * (quad + log_det + m * np.log(2.0 * np.pi))


def log_evidence(
    prior: GaussianPrior,
    model: ObservationModel,
    y: np.ndarray,
    prior_log_scale: float | None = None,
    noise_log_scale: float = 0.0,
) -> float:
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape != (model.m,):
        raise ValueError(f"expected {model.m} measurements, got {y.shape}")
    if prior_log_scale is None:
        prior_log_scale = prior.log_scale
    hq0ht = model.h @ prior.q0 @ model.h.T
    residual = y - model.h @ prior.mean.values
    return log_evidence_matrices(
        hq0ht, model.r0_diag, residual, prior_log_scale, noise_log_scale
    )


def evidence_grid(
    prior: GaussianPrior,
    model: ObservationModel,
    y: np.ndarray,
    prior_grid: Sequence[float] = DEFAULT_LOG_SCALE_GRID,
    noise_grid: Sequence[float] = DEFAULT_LOG_SCALE_GRID,
) -> np.ndarray:
    """Evidence at every (prior, noise) log-scale pair; failures become -inf."""
    hq0ht = model.h @ prior.q0 @ model.h.T
    residual = np.asarray(y, dtype=np.float64) - model.h @ prior.mean.values
    out = np.full((len(prior_grid), len(noise_grid)), -np.inf)
    for a, t1 in enumerate(prior_grid):
        for b, t2 in enumerate(noise_grid):
            try:
                out[a, b] = log_evidence_matrices(
                    hq0ht, model.r0_diag, residual, t1, t2
                )
            except FactorizationError:
                pass
    return out


def grid_search_scales(
    prior: GaussianPrior,
    model: ObservationModel,
    y: np.ndarray,
    prior_grid: Sequence[float] = DEFAULT_LOG_SCALE_GRID,
    noise_grid: Sequence[float] = DEFAULT_LOG_SCALE_GRID,
) -> tuple[float, float]:
    """Arg max of the evidence over the grid; lexicographic tie-break."""
    if not len(prior_grid) or not len(noise_grid):
        raise ValueError("scale grids must be non-empty")
    prior_grid = sorted(float(t) for t in prior_grid)
    noise_grid = sorted(float(t) for t in noise_grid)
    surface = evidence_grid(prior, model, y, prior_grid, noise_grid)
    if not np.any(np.isfinite(surface)):
        raise FactorizationError("evidence evaluation failed at every grid point")
    best = None
    best_val = -np.inf
    for a, t1 in enumerate(prior_grid):
        for b, t2 in enumerate(noise_grid):
            if surface[a, b] > best_val:
                best_val = surface[a, b]
                best = (t1, t2)
    return best


# -- conditional realizations -------------------------------------------------


@dataclass
class RealizationBatch:
    """Realizations stacked row-wise with point-wise summary statistics."""

    grid: GridSpec
    values: np.ndarray  # (count, n)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or (values.size and values.shape[1] != self.grid.n):
            raise ValueError(f"realizations must be (count, {self.grid.n})")
        self.values = values

    def __len__(self) -> int:
        return len(self.values)

    def realization(self, index: int) -> Field:
        return Field(self.grid, self.values[index])

    def mean(self) -> np.ndarray:
        self._require_nonempty()
        return self.values.mean(axis=0)

    def std(self) -> np.ndarray:
        # ddof=0 so a single realization has zero spread
        self._require_nonempty()
        return self.values.std(axis=0)

    def quantile_band(self, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
        """Point-wise empirical central band at the given coverage level."""
        self._require_nonempty()
        tail = (1.0 - level) / 2.0
        lo = np.quantile(self.values, tail, axis=0)
        hi = np.quantile(self.values, 1.0 - tail, axis=0)
        return lo, hi

    def _require_nonempty(self):
        if len(self.values) == 0:
            raise ValueError("empty realization batch has no summary statistics")


def empty_batch(grid: GridSpec) -> RealizationBatch:
    return RealizationBatch(grid, np.empty((0, grid.n)))


def sample_posterior_cholesky(
    post: PosteriorGaussian, count: int, seed: int
) -> RealizationBatch:
    """mean + L u with L the (jittered) Cholesky factor of the posterior covariance."""
    if count == 0:
        return empty_batch(post.grid)
    chol, _ = cholesky_with_jitter(post.covariance)
    n = post.grid.n
    out = np.empty((count, n))
    for i in range(count):
        u = substream(seed, "realization", i).standard_normal(n)
        out[i] = post.mean.values + chol @ u
    return RealizationBatch(post.grid, out)


def bootstrap_draw(
    chol_q: np.ndarray,
    mean_values: np.ndarray,
    noise_std: np.ndarray,
    seed: int,
    index: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Matched (unconditional field, measurement noise) draw for one index.

    Both bootstrap samplers (gain-based and estimator-based) share this
    helper so realizations with equal (seed, index) use identical draws.
    """
    rng = substream(seed, "realization", index)
    x_u = mean_values + chol_q @ rng.standard_normal(mean_values.size)
    v = rng.standard_normal(noise_std.size) * noise_std
    return x_u, v


def sample_posterior_bootstrap(
    prior: GaussianPrior,
    model: ObservationModel,
    noise_log_scale: float,
    y: np.ndarray,
    count: int,
    seed: int,
) -> RealizationBatch:
    """Conditioning by bootstrap: x_c = x_u + G (y + v - H x_u).

    Each realization perturbs an unconditional prior draw toward the
    noise-perturbed measurements, avoiding any factorization of the n x n
    posterior covariance.
    """
    if count == 0:
        return empty_batch(prior.grid)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    gain = compute_gain(prior, model, noise_log_scale)
    chol_q, _ = cholesky_with_jitter(prior.covariance)
    noise_std = np.sqrt(model.noise_diag(noise_log_scale))
    out = np.empty((count, prior.grid.n))
    for i in range(count):
        x_u, v = bootstrap_draw(chol_q, prior.mean.values, noise_std, seed, i)
        out[i] = x_u + gain @ (y + v - model.h @ x_u)
    return RealizationBatch(prior.grid, out)
