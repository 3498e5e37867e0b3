"""Gaussian-process surrogate with a Matern 3/2 kernel and estimated nugget.

The surrogate is fitted on evaluation scores (higher is better) but models
their negation, so downstream acquisition code works in the conventional
minimization orientation: lower posterior mean means a better predicted
score. Hyperparameters (per-dimension lengthscales, signal variance, noise
variance) maximize the log marginal likelihood over a bounded box, searched
in log space by multi-restart CMA-ES. Targets are standardized inside the
fit for numerical stability; fitted models report in output units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from . import cmaes
from .seeding import derive_seed, make_rng

SQRT3 = math.sqrt(3.0)
JITTER_START = 1e-10
JITTER_MAX = 1e-6

# marginal-likelihood search box on standardized targets
LENGTHSCALE_RANGE = (0.05, 10.0)
SIGNAL_FLOOR = 1e-4
NOISE_FLOOR = 1e-6


class FactorizationError(np.linalg.LinAlgError):
    """Kernel matrix stayed indefinite through the whole jitter ladder."""


@dataclass(frozen=True)
class GpHyperParams:
    """Kernel and noise hyperparameters; lengthscales are per-dimension."""

    signal_variance: float
    lengthscales: np.ndarray
    noise_variance: float
    prior_mean: float = 0.0

    def __post_init__(self) -> None:
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        object.__setattr__(self, "lengthscales", ls)
        if self.signal_variance <= 0:
            raise ValueError("signal variance must be positive")
        if np.any(ls <= 0):
            raise ValueError("lengthscales must be positive")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be non-negative")


def matern32(x: np.ndarray, y: np.ndarray, hyper: GpHyperParams) -> float:
    """Matern 3/2 covariance sigma^2 (1 + sqrt(3) r) exp(-sqrt(3) r)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("point dimensions differ")
    r = math.sqrt(float(np.sum(((x - y) / hyper.lengthscales) ** 2)))
    return hyper.signal_variance * (1.0 + SQRT3 * r) * math.exp(-SQRT3 * r)


def _kernel_matrix(
    scaled: np.ndarray, signal_variance: float
) -> np.ndarray:
    """Matern 3/2 gram matrix from lengthscale-scaled inputs."""
    sq = np.sum(scaled**2, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * scaled @ scaled.T, 0.0)
    r = np.sqrt(d2)
    return signal_variance * (1.0 + SQRT3 * r) * np.exp(-SQRT3 * r)


def _cross_kernel(
    scaled_train: np.ndarray, scaled_query: np.ndarray, signal_variance: float
) -> np.ndarray:
    d2 = np.maximum(
        np.sum(scaled_train**2, axis=1)[:, None]
        + np.sum(scaled_query**2, axis=1)[None, :]
        - 2.0 * scaled_train @ scaled_query.T,
        0.0,
    )
    r = np.sqrt(d2)
    return signal_variance * (1.0 + SQRT3 * r) * np.exp(-SQRT3 * r)


def _chol_with_jitter(k: np.ndarray) -> tuple[np.ndarray, float]:
    jitter = JITTER_START
    eye = np.eye(k.shape[0])
    while jitter <= JITTER_MAX:
        try:
            return np.linalg.cholesky(k + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise FactorizationError(
        f"kernel matrix not positive definite up to jitter {JITTER_MAX}"
    )


def log_marginal_likelihood(
    hyper: GpHyperParams, inputs: np.ndarray, targets: np.ndarray
) -> float:
    """Log marginal likelihood of minimization-domain targets under hyper."""
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    y = np.asarray(targets, dtype=float) - hyper.prior_mean
    n = x.shape[0]
    k = _kernel_matrix(x / hyper.lengthscales, hyper.signal_variance)
    k[np.diag_indices_from(k)] += hyper.noise_variance
    try:
        chol, _ = _chol_with_jitter(k)
    except FactorizationError:
        return -np.inf
    z = solve_triangular(chol, y, lower=True)
    return float(
        -0.5 * np.dot(z, z)
        - np.sum(np.log(np.diag(chol)))
        - 0.5 * n * math.log(2.0 * math.pi)
    )


class GpModel:
    """Immutable fitted GP; safe for concurrent posterior queries.

    `train_targets` live in the minimization domain (negated scores when
    built through `fit`). The factorization of (K + noise I) is cached at
    construction.
    """

    def __init__(
        self,
        hyper: GpHyperParams,
        train_inputs: np.ndarray,
        train_targets: np.ndarray,
        degenerate: bool = False,
        fit_log_likelihood: float | None = None,
    ) -> None:
        self.hyper = hyper
        x = np.asarray(train_inputs, dtype=float)
        self.train_inputs = x.reshape(0, hyper.lengthscales.size) if x.size == 0 else np.atleast_2d(x)
        self.train_targets = np.asarray(train_targets, dtype=float).reshape(-1)
        if self.train_inputs.shape[0] != self.train_targets.size:
            raise ValueError("inputs/targets length mismatch")
        self.degenerate = degenerate
        self.fit_log_likelihood = fit_log_likelihood
        self.n_train = self.train_inputs.shape[0]
        self.jitter = 0.0
        if self.n_train > 0:
            self._scaled = self.train_inputs / hyper.lengthscales
            k = _kernel_matrix(self._scaled, hyper.signal_variance)
            k[np.diag_indices_from(k)] += hyper.noise_variance
            self._chol, self.jitter = _chol_with_jitter(k)
            z = solve_triangular(
                self._chol, self.train_targets - hyper.prior_mean, lower=True
            )
            self._alpha = solve_triangular(self._chol, z, lower=True, trans="T")
            # explicit L^-1 turns posterior queries into plain matmuls
            self._chol_inv = solve_triangular(
                self._chol, np.eye(self.n_train), lower=True, check_finite=False
            )

    @property
    def noise_std(self) -> float:
        return math.sqrt(self.hyper.noise_variance)

    def posterior(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance of the latent function at x.

        x may be a single point (m,) or a batch (k, m); outputs match.
        Variances are clamped at zero after the numerical floor.
        """
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        h = self.hyper
        if self.n_train == 0:
            mean = np.full(pts.shape[0], h.prior_mean)
            var = np.full(pts.shape[0], h.signal_variance)
        else:
            kx = _cross_kernel(self._scaled, pts / h.lengthscales, h.signal_variance)
            mean = h.prior_mean + kx.T @ self._alpha
            v = self._chol_inv @ kx
            var = np.maximum(h.signal_variance - np.sum(v**2, axis=0), 0.0)
        if single:
            return float(mean[0]), float(var[0])
        return mean, var


def _batched_negative_lml(
    log_hyper: np.ndarray, diffsq: np.ndarray, targets: np.ndarray
) -> np.ndarray:
    """Negative log marginal likelihood for a (k, m+2) batch of log hypers."""
    k_batch = np.atleast_2d(log_hyper)
    m = diffsq.shape[2]
    n = targets.size
    inv_l2 = np.exp(-2.0 * k_batch[:, :m])
    sig2 = np.exp(k_batch[:, m])
    tau2 = np.exp(k_batch[:, m + 1])
    r = np.sqrt(np.einsum("abj,kj->kab", diffsq, inv_l2))
    gram = (1.0 + SQRT3 * r) * np.exp(-SQRT3 * r)
    gram *= sig2[:, None, None]
    idx = np.arange(n)
    gram[:, idx, idx] += tau2[:, None] + JITTER_START
    out = np.full(k_batch.shape[0], np.inf)
    try:
        chols = np.linalg.cholesky(gram)
        z = np.linalg.solve(chols, np.broadcast_to(targets, (k_batch.shape[0], n))[..., None])
        quad = np.sum(z[..., 0] ** 2, axis=1)
        logdet = 2.0 * np.sum(np.log(np.einsum("kii->ki", chols)), axis=1)
        out = 0.5 * (quad + logdet + n * math.log(2.0 * math.pi))
    except np.linalg.LinAlgError:
        for i, row in enumerate(k_batch):
            try:
                chol = np.linalg.cholesky(gram[i])
                z = solve_triangular(chol, targets, lower=True)
                out[i] = 0.5 * (
                    np.dot(z, z)
                    + 2.0 * np.sum(np.log(np.diag(chol)))
                    + n * math.log(2.0 * math.pi)
                )
            except np.linalg.LinAlgError:
                out[i] = np.inf
    return out


def fit(
    inputs: np.ndarray,
    scores: np.ndarray,
    seed: int,
    restarts: int = 2,
    max_evals: int = 500,
    warm_start: GpHyperParams | None = None,
) -> GpModel:
    """Fit a GP to scores (higher is better) over unit-cube inputs.

    Scores are negated into minimization targets and standardized; the
    hyperparameters maximize the log marginal likelihood over a bounded
    box via multi-restart CMA-ES in log space, warm-startable from a
    previous fit. All-equal scores short-circuit to a flagged degenerate
    model with the noise variance at its floor.
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    s = np.asarray(scores, dtype=float).reshape(-1)
    n, m = x.shape
    if n < 2:
        raise ValueError("fit needs at least 2 observations")
    if s.size != n:
        raise ValueError("inputs/scores length mismatch")
    y = -s
    y_mean = float(np.mean(y))
    y_sd = float(np.std(y))
    if y_sd < 1e-12:
        hyper = GpHyperParams(
            signal_variance=SIGNAL_FLOOR,
            lengthscales=np.ones(m),
            noise_variance=NOISE_FLOOR,
            prior_mean=y_mean,
        )
        return GpModel(hyper, x, y, degenerate=True)

    t = (y - y_mean) / y_sd
    var_t = float(np.var(t))
    lo = np.concatenate(
        [
            np.full(m, math.log(LENGTHSCALE_RANGE[0])),
            [math.log(SIGNAL_FLOOR), math.log(NOISE_FLOOR)],
        ]
    )
    hi = np.concatenate(
        [
            np.full(m, math.log(LENGTHSCALE_RANGE[1])),
            [math.log(25.0 * var_t + SIGNAL_FLOOR), math.log(var_t + NOISE_FLOOR)],
        ]
    )
    diffsq = (x[:, None, :] - x[None, :, :]) ** 2

    def objective(batch: np.ndarray) -> np.ndarray:
        return _batched_negative_lml(batch, diffsq, t)

    if warm_start is not None:
        h0 = np.concatenate(
            [
                np.log(warm_start.lengthscales),
                [
                    math.log(max(warm_start.signal_variance / y_sd**2, 1e-300)),
                    math.log(max(warm_start.noise_variance / y_sd**2, 1e-300)),
                ],
            ]
        )
        sigma_first = 0.1
    else:
        h0 = np.concatenate([np.full(m, math.log(0.3)), [0.0, math.log(0.05)]])
        sigma_first = 0.3
    h0 = np.clip(h0, lo, hi)
    rng = make_rng(derive_seed(seed, "gp-fit-starts"))
    starts = [h0] + [
        lo + rng.random(m + 2) * (hi - lo) for _ in range(max(restarts - 1, 0))
    ]
    sigma0s = [sigma_first] + [0.3] * (len(starts) - 1)

    result = cmaes.minimize_restarts(
        objective, lo, hi, budget=max_evals, restarts=len(starts),
        seed=derive_seed(seed, "gp-fit"), x0s=np.array(starts),
        sigma0s=sigma0s, batch=True,
    )
    best = result.best_x
    hyper = GpHyperParams(
        signal_variance=float(np.exp(best[m])) * y_sd**2,
        lengthscales=np.exp(best[:m]),
        noise_variance=float(np.exp(best[m + 1])) * y_sd**2,
        prior_mean=y_mean,
    )
    return GpModel(
        hyper, x, y, degenerate=False, fit_log_likelihood=float(-result.best_f)
    )
