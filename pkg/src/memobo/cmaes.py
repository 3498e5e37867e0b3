"""Covariance Matrix Adaptation Evolution Strategy for box-constrained search.

A self-contained CMA-ES minimizer with the canonical constants. It serves
two masters here: maximizing the acquisition function over the (possibly
reduced) unit box and maximizing the GP marginal likelihood over its
hyperparameter box. Both need strict determinism, box feasibility, and a
hard evaluation budget rather than convergence-based stopping.

The optimizer works internally in box-normalized coordinates (the box maps
to the unit cube), so a single scalar step size suits anisotropic boxes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .seeding import derive_seed, make_rng

EIGENVALUE_FLOOR = 1e-14
RESAMPLE_TRIES = 100


@dataclass
class CmaState:
    """Sampling distribution state, in box-normalized coordinates."""

    mean: np.ndarray
    step_size: float
    cov: np.ndarray
    path_sigma: np.ndarray
    path_c: np.ndarray
    popsize: int
    parents: int
    weights: np.ndarray
    generation: int = 0


@dataclass(frozen=True)
class CmaResult:
    best_x: np.ndarray
    best_f: float
    history: tuple[tuple[int, float], ...]
    n_evals: int


def default_popsize(m: int) -> int:
    return 4 + int(math.floor(3.0 * math.log(m)))


def default_config(
    m: int,
    mean: np.ndarray | None = None,
    step_size: float | None = None,
    popsize: int | None = None,
) -> CmaState:
    """Initial CMA state for dimension m over the normalized unit box.

    popsize defaults to 4 + floor(3 ln m); weights are the standard
    log-rank recombination weights over the best half; the step size
    defaults to 0.3 of the (normalized) box width, the mean to the box
    center.
    """
    if m < 1:
        raise ValueError("dimension must be >= 1")
    lam = default_popsize(m) if popsize is None else int(popsize)
    if lam < 2:
        raise ValueError("popsize must be >= 2")
    mu = lam // 2
    raw = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw / raw.sum()
    return CmaState(
        mean=np.full(m, 0.5) if mean is None else np.asarray(mean, dtype=float),
        step_size=0.3 if step_size is None else float(step_size),
        cov=np.eye(m),
        path_sigma=np.zeros(m),
        path_c=np.zeros(m),
        popsize=lam,
        parents=mu,
        weights=weights,
    )


def _strategy_constants(m: int, weights: np.ndarray) -> dict[str, float]:
    mueff = float(weights.sum() ** 2 / np.sum(weights**2))
    c_sigma = (mueff + 2.0) / (m + mueff + 5.0)
    d_sigma = 1.0 + 2.0 * max(0.0, math.sqrt((mueff - 1.0) / (m + 1.0)) - 1.0) + c_sigma
    c_c = (4.0 + mueff / m) / (m + 4.0 + 2.0 * mueff / m)
    c_1 = 2.0 / ((m + 1.3) ** 2 + mueff)
    c_mu = min(
        1.0 - c_1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((m + 2.0) ** 2 + mueff)
    )
    chi_m = math.sqrt(m) * (1.0 - 1.0 / (4.0 * m) + 1.0 / (21.0 * m * m))
    return {
        "mueff": mueff, "c_sigma": c_sigma, "d_sigma": d_sigma,
        "c_c": c_c, "c_1": c_1, "c_mu": c_mu, "chi_m": chi_m,
    }


def _decompose(cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    cov = 0.5 * (cov + cov.T)
    eigvals, eigvecs = np.linalg.eigh(cov)
    eigvals = np.maximum(eigvals, EIGENVALUE_FLOOR)
    return eigvals, eigvecs


def minimize(
    objective: Callable[[np.ndarray], np.ndarray | float],
    lower: Sequence[float] | np.ndarray,
    upper: Sequence[float] | np.ndarray,
    budget: int,
    seed: int,
    x0: np.ndarray | None = None,
    sigma0: float = 0.3,
    popsize: int | None = None,
    batch: bool = False,
) -> CmaResult:
    """Minimize `objective` over the box [lower, upper] within `budget` evals.

    With `batch=True` the objective receives a (k, m) array per generation
    and returns k values; otherwise it is called point by point. Sampled
    points are kept inside the box by resampling (up to 100 tries per
    point) and finally coordinate clipping, so the objective never sees an
    out-of-box point. Non-finite objective values are treated as +inf but
    still count against the budget. Deterministic given the seed.
    """
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    m = lo.size
    if hi.size != m or np.any(hi <= lo):
        raise ValueError("degenerate or mismatched box")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    width = hi - lo

    def to_user(u: np.ndarray) -> np.ndarray:
        return lo + u * width

    def eval_points(u_pts: np.ndarray) -> np.ndarray:
        x_user = to_user(u_pts)
        if batch:
            vals = np.asarray(objective(x_user), dtype=float).reshape(-1)
        else:
            vals = np.array([float(objective(x)) for x in x_user])
        vals[~np.isfinite(vals)] = np.inf
        return vals

    mean0 = None if x0 is None else (np.asarray(x0, dtype=float) - lo) / width
    state = default_config(m, mean=mean0, step_size=sigma0, popsize=popsize)
    if budget < state.popsize:
        raise ValueError("budget must cover at least one generation")

    consts = _strategy_constants(m, state.weights)
    rng = make_rng(seed)
    lam, mu, w = state.popsize, state.parents, state.weights
    c_sigma, d_sigma = consts["c_sigma"], consts["d_sigma"]
    c_c, c_1, c_mu = consts["c_c"], consts["c_1"], consts["c_mu"]
    mueff, chi_m = consts["mueff"], consts["chi_m"]

    best_x = np.clip(state.mean.copy(), 0.0, 1.0)
    best_f = np.inf
    history: list[tuple[int, float]] = []
    n_evals = 0

    ps_coef = math.sqrt(c_sigma * (2.0 - c_sigma) * mueff)
    pc_coef = math.sqrt(c_c * (2.0 - c_c) * mueff)
    h_thresh = 1.4 + 2.0 / (m + 1.0)

    while n_evals + lam <= budget:
        if not np.all(np.isfinite(state.cov)) or not math.isfinite(state.step_size):
            state.cov = np.eye(m)
            state.step_size = sigma0
            state.path_sigma[:] = 0.0
            state.path_c[:] = 0.0
        eigvals, eigvecs = _decompose(state.cov)
        sqrt_d = np.sqrt(eigvals)

        z = rng.standard_normal((lam, m))
        u = state.mean + state.step_size * (z * sqrt_d) @ eigvecs.T
        out = ((u < 0.0) | (u > 1.0)).any(axis=1)
        tries = 0
        while out.any() and tries < RESAMPLE_TRIES:
            k = int(out.sum())
            z_new = rng.standard_normal((k, m))
            u_new = state.mean + state.step_size * (z_new * sqrt_d) @ eigvecs.T
            u[out] = u_new
            out[out] = ((u_new < 0.0) | (u_new > 1.0)).any(axis=1)
            tries += 1
        np.clip(u, 0.0, 1.0, out=u)

        fvals = eval_points(u)
        n_evals += lam
        order = np.argsort(fvals, kind="stable")
        if fvals[order[0]] < best_f:
            best_f = float(fvals[order[0]])
            best_x = u[order[0]].copy()

        # recombination on repaired coordinates
        y_sel = (u[order[:mu]] - state.mean) / state.step_size
        y_w = w @ y_sel
        state.mean = state.mean + state.step_size * y_w

        inv_sqrt = eigvecs @ ((eigvecs / sqrt_d).T)
        state.path_sigma = (1.0 - c_sigma) * state.path_sigma + ps_coef * (
            inv_sqrt @ y_w
        )
        state.generation += 1
        ps_norm = math.sqrt(float(state.path_sigma @ state.path_sigma))
        denom = math.sqrt(1.0 - (1.0 - c_sigma) ** (2.0 * state.generation))
        h_sigma = 1.0 if ps_norm / denom / chi_m < h_thresh else 0.0
        state.path_c = (1.0 - c_c) * state.path_c + (h_sigma * pc_coef) * y_w

        rank_mu = (y_sel * w[:, None]).T @ y_sel
        state.cov = (
            (1.0 - c_1 - c_mu + (1.0 - h_sigma) * c_1 * c_c * (2.0 - c_c)) * state.cov
            + c_1 * np.outer(state.path_c, state.path_c)
            + c_mu * rank_mu
        )
        state.step_size = state.step_size * math.exp(
            (c_sigma / d_sigma) * (ps_norm / chi_m - 1.0)
        )
        history.append((n_evals, best_f))

    return CmaResult(
        best_x=to_user(best_x), best_f=best_f,
        history=tuple(history), n_evals=n_evals,
    )


def minimize_restarts(
    objective: Callable[[np.ndarray], np.ndarray | float],
    lower: Sequence[float] | np.ndarray,
    upper: Sequence[float] | np.ndarray,
    budget: int,
    restarts: int,
    seed: int,
    x0s: np.ndarray | None = None,
    sigma0: float = 0.3,
    sigma0s: Sequence[float] | None = None,
    popsize: int | None = None,
    batch: bool = False,
) -> CmaResult:
    """Best of `restarts` independent runs, `budget` evaluations each.

    `x0s` optionally fixes the start point of each restart (user
    coordinates); `sigma0s` optionally sets a per-restart step size.
    """
    best: CmaResult | None = None
    total_evals = 0
    for r in range(restarts):
        x0 = None if x0s is None else np.asarray(x0s)[r]
        s0 = sigma0 if sigma0s is None else float(sigma0s[r])
        res = minimize(
            objective, lower, upper, budget, derive_seed(seed, "restart", r),
            x0=x0, sigma0=s0, popsize=popsize, batch=batch,
        )
        total_evals += res.n_evals
        if best is None or res.best_f < best.best_f:
            best = res
    assert best is not None
    return CmaResult(
        best_x=best.best_x, best_f=best.best_f,
        history=best.history, n_evals=total_evals,
    )
