"""Zero-mean Gaussian process surrogate over latent coordinates.

Targets are standardized before fitting because the prior mean is zero;
predictions are mapped back to response units. The squared-exponential
kernel is isotropic: a single length scale for all latent dimensions.
Hyperparameters (signal std, length scale, noise std) are chosen by
maximizing the log marginal likelihood with a multi-start Nelder-Mead
search in log space. Fitted models are immutable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import minimize

from .errors import (
    EmptyInputError,
    NotPositiveDefiniteError,
    OptimizerFailedError,
    ShapeMismatchError,
)
from .mathcore import cholesky_decompose, solve_spd

NOISE_FLOOR = 1e-6

# log-space offsets applied to the starting point, one row per restart
_RESTART_OFFSETS = np.array(
    [
        [0.0, 0.0, 0.0],
        [0.7, -0.7, 0.0],
        [-0.7, 0.7, 0.0],
        [0.0, 0.0, -2.0],
        [1.0, 0.0, 1.0],
        [0.0, -1.5, -1.0],
        [-1.0, 1.5, 1.0],
        [0.7, 0.7, -2.0],
    ]
)


@dataclass(frozen=True)
class GpHyperparams:
    signal_std: float
    length_scale: float
    noise_std: float

    def __post_init__(self):
        if self.signal_std <= 0.0 or self.length_scale <= 0.0:
            raise ValueError("signal_std and length_scale must be positive")
        if self.noise_std < NOISE_FLOOR:
            object.__setattr__(self, "noise_std", NOISE_FLOOR)


def kernel(theta_i: np.ndarray, theta_j: np.ndarray, h: GpHyperparams) -> float:
    """Squared-exponential covariance between two latent points."""
    theta_i = np.asarray(theta_i, dtype=float)
    theta_j = np.asarray(theta_j, dtype=float)
    if theta_i.shape != theta_j.shape:
        raise ShapeMismatchError(f"latent shapes differ: {theta_i.shape} vs {theta_j.shape}")
    d2 = float(np.sum((theta_i - theta_j) ** 2))
    return h.signal_std**2 * np.exp(-0.5 * d2 / h.length_scale**2)


def kernel_matrix(a: np.ndarray, b: np.ndarray, h: GpHyperparams) -> np.ndarray:
    """Cross-covariance matrix between row sets ``a`` (n x d) and ``b`` (m x d)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[1] != b.shape[1]:
        raise ShapeMismatchError(f"latent widths differ: {a.shape[1]} vs {b.shape[1]}")
    # single work buffer: d2 -> exponent -> kernel values
    k = -2.0 * (a @ b.T)
    k += np.sum(a * a, axis=1)[:, None]
    k += np.sum(b * b, axis=1)[None, :]
    np.maximum(k, 0.0, out=k)
    k *= -0.5 / h.length_scale**2
    np.exp(k, out=k)
    k *= h.signal_std**2
    return k


@dataclass(frozen=True)
class GpModel:
    """Fitted surrogate with cached Cholesky factor and weight vector."""

    latents: np.ndarray  # n x nz
    y_mean: float
    y_std: float
    y_standardized: np.ndarray  # n
    hyper: GpHyperparams
    chol: np.ndarray  # lower factor of K + noise^2 I (standardized space)
    alpha: np.ndarray  # solve(K + noise^2 I, y_standardized)

    @classmethod
    def build(cls, latents: np.ndarray, y: np.ndarray, hyper: GpHyperparams) -> "GpModel":
        """Assemble the model at fixed hyperparameters (no optimization)."""
        latents = np.asarray(latents, dtype=float)
        y = np.asarray(y, dtype=float)
        if latents.ndim != 2 or latents.shape[0] != y.shape[0]:
            raise ShapeMismatchError(
                f"latents {latents.shape} and targets {y.shape} do not align"
            )
        if latents.shape[0] < 2:
            raise EmptyInputError("GP fitting needs at least 2 points")
        if not (np.all(np.isfinite(latents)) and np.all(np.isfinite(y))):
            raise ValueError("training data contains non-finite values")
        y_mean = float(np.mean(y))
        y_std = float(np.std(y))
        if y_std == 0.0:
            y_std = 1.0  # constant targets: standardized residuals are zero
        y_standardized = (y - y_mean) / y_std
        k = kernel_matrix(latents, latents, hyper)
        k[np.diag_indices_from(k)] += hyper.noise_std**2
        chol = cholesky_decompose(k, 0.0)
        alpha = solve_spd(chol, y_standardized)
        return cls(
            latents=latents,
            y_mean=y_mean,
            y_std=y_std,
            y_standardized=y_standardized,
            hyper=hyper,
            chol=chol,
            alpha=alpha,
        )

    @property
    def n(self) -> int:
        return self.latents.shape[0]

    @property
    def nz(self) -> int:
        return self.latents.shape[1]

    def _cross(self, queries: np.ndarray) -> np.ndarray:
        queries = np.asarray(queries, dtype=float)
        if queries.ndim != 2 or queries.shape[1] != self.nz:
            raise ShapeMismatchError(
                f"expected queries with {self.nz} columns, got shape {queries.shape}"
            )
        return kernel_matrix(self.latents, queries, self.hyper)

    def predict_mean_batch(self, queries: np.ndarray) -> np.ndarray:
        """Posterior mean at each query row, in response units."""
        r = self._cross(queries)
        return self.y_mean + self.y_std * (r.T @ self.alpha)

    def predict_var_batch(self, queries: np.ndarray) -> np.ndarray:
        """Posterior variance at each query row, in response units squared."""
        r = self._cross(queries)
        v = solve_triangular(self.chol, r, lower=True)
        var_std = self.hyper.signal_std**2 - np.sum(v * v, axis=0)
        return self.y_std**2 * np.maximum(var_std, 0.0)

    def predict_mean(self, theta: np.ndarray) -> float:
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 1:
            raise ShapeMismatchError("predict_mean expects a single latent vector")
        return float(self.predict_mean_batch(theta[None, :])[0])

    def predict_var(self, theta: np.ndarray) -> float:
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 1:
            raise ShapeMismatchError("predict_var expects a single latent vector")
        return float(self.predict_var_batch(theta[None, :])[0])


def neg_log_marginal_likelihood(
    latents: np.ndarray, y_standardized: np.ndarray, hyper: GpHyperparams
) -> float:
    """Negative log evidence of the standardized targets under the prior."""
    n = latents.shape[0]
    k = kernel_matrix(latents, latents, hyper)
    k[np.diag_indices_from(k)] += hyper.noise_std**2
    chol = cholesky_decompose(k, 0.0)
    alpha = solve_spd(chol, y_standardized)
    return float(
        0.5 * y_standardized @ alpha
        + np.sum(np.log(np.diag(chol)))
        + 0.5 * n * np.log(2.0 * np.pi)
    )


def _unpack(params: np.ndarray, omega_floor: float) -> GpHyperparams:
    return GpHyperparams(
        signal_std=float(np.exp(params[0])),
        length_scale=omega_floor + float(np.exp(params[1])),
        noise_std=NOISE_FLOOR + float(np.exp(params[2])),
    )


def fit_gp(
    latents: np.ndarray,
    y: np.ndarray,
    init: GpHyperparams | None = None,
    restarts: int = 8,
    max_iterations: int = 500,
    tolerance: float = 1e-8,
) -> GpModel:
    """Maximum-likelihood fit of the three hyperparameters.

    Runs a simplex search from ``restarts`` deterministic starting points
    spread around ``init`` in log space; the winner is the lowest final
    objective (ties broken by restart index).
    """
    latents = np.asarray(latents, dtype=float)
    y = np.asarray(y, dtype=float)
    if latents.ndim != 2 or latents.shape[0] != y.shape[0]:
        raise ShapeMismatchError(f"latents {latents.shape} and targets {y.shape} do not align")
    if latents.shape[0] < 2:
        raise EmptyInputError("GP fitting needs at least 2 points")

    y_mean = float(np.mean(y))
    y_std = float(np.std(y))
    if y_std == 0.0:
        y_std = 1.0
    y_standardized = (y - y_mean) / y_std

    diffs = latents[:, None, :] - latents[None, :, :]
    dists = np.sqrt(np.sum(diffs * diffs, axis=2))
    np.fill_diagonal(dists, np.inf)
    nn = dists.min(axis=1)
    # below the typical nearest-neighbor spacing there is no evidence for
    # structure; flooring the length scale rules out the degenerate
    # interpolate-everything optimum on unstructured targets
    omega_floor = float(np.median(nn[np.isfinite(nn)])) if np.isfinite(nn).any() else 0.0
    if not np.isfinite(omega_floor) or omega_floor <= 0.0:
        omega_floor = 1e-3

    if init is None:
        med = float(np.median(dists[np.isfinite(dists)]))
        init = GpHyperparams(
            signal_std=1.0,
            length_scale=med if med > 0.0 else 1.0,
            noise_std=0.1,
        )

    x0 = np.array(
        [
            np.log(init.signal_std),
            np.log(max(init.length_scale - omega_floor, omega_floor)),
            np.log(max(init.noise_std - NOISE_FLOOR, NOISE_FLOOR)),
        ]
    )

    def objective(params: np.ndarray) -> float:
        try:
            val = neg_log_marginal_likelihood(
                latents, y_standardized, _unpack(params, omega_floor)
            )
        except (NotPositiveDefiniteError, FloatingPointError, OverflowError, ValueError):
            return 1e25
        return val if np.isfinite(val) else 1e25

    best_fun = np.inf
    best_params = None
    for r in range(restarts):
        start = x0 + _RESTART_OFFSETS[r % len(_RESTART_OFFSETS)]
        result = minimize(
            objective,
            start,
            method="Nelder-Mead",
            options={
                "maxiter": max_iterations,
                "xatol": tolerance,
                "fatol": tolerance,
            },
        )
        if result.fun < best_fun and result.fun < 1e25:
            best_fun = float(result.fun)
            best_params = np.asarray(result.x)
    if best_params is None:
        raise OptimizerFailedError("no restart produced a finite marginal likelihood")
    return GpModel.build(latents, y, _unpack(best_params, omega_floor))
