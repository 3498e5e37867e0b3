"""Acquisition criteria over the GP posterior.

Everything is stated for minimization (the surrogate models negated
scores). The quantile q(x) = m(x) + z_beta s(x) with beta above 0.5 is a
pessimistic value estimate; the expected quantile improvement scores a
candidate by how much one more noisy evaluation there is expected to push
the best quantile down. Plain expected improvement is kept for the
noise-free degenerate check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .gp import GpModel

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class AcquisitionConfig:
    """Quantile level and the anticipated noise std of the next evaluation."""

    beta: float = 0.65
    tau_future: float = 0.0

    def __post_init__(self) -> None:
        if not (0.5 <= self.beta < 1.0):
            raise ValueError(f"beta must be in [0.5, 1), got {self.beta}")
        if self.tau_future < 0.0:
            raise ValueError("tau_future must be non-negative")


def _phi(z: np.ndarray) -> np.ndarray:
    return INV_SQRT_2PI * np.exp(-0.5 * z * z)


def quantile(model: GpModel, x: np.ndarray, beta: float) -> np.ndarray | float:
    """beta-quantile of the posterior: m(x) + ndtri(beta) s(x); larger is worse."""
    mean, var = model.posterior(x)
    return mean + float(ndtri(beta)) * np.sqrt(var)


def q_min(model: GpModel, evaluated_points: np.ndarray, beta: float) -> float:
    """Minimum posterior beta-quantile over the evaluated design points."""
    pts = np.atleast_2d(np.asarray(evaluated_points, dtype=float))
    if pts.shape[0] < 1:
        raise ValueError("q_min needs at least one evaluated point")
    return float(np.min(quantile(model, pts, beta)))


def eqi(
    model: GpModel,
    x: np.ndarray,
    config: AcquisitionConfig,
    incumbent_quantile: float,
) -> np.ndarray | float:
    """Expected quantile improvement at x against the incumbent quantile.

    The future quantile after one more evaluation with noise std
    tau_future is normal with
        mean  m_Q = m + ndtri(beta) sqrt(tau^2 s^2 / (tau^2 + s^2))
        std   s_Q = s^2 / sqrt(tau^2 + s^2)
    and EQI is the expected positive part of (incumbent - future quantile).
    """
    mean, var = model.posterior(x)
    single = np.asarray(mean).ndim == 0
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    var = np.atleast_1d(np.asarray(var, dtype=float))
    tau2 = config.tau_future**2
    z_beta = float(ndtri(config.beta))

    denom = tau2 + var
    with np.errstate(divide="ignore", invalid="ignore"):
        shrink = np.where(denom > 0.0, np.sqrt(tau2 * var / np.maximum(denom, 1e-300)), 0.0)
        s_q = np.where(denom > 0.0, var / np.sqrt(np.maximum(denom, 1e-300)), 0.0)
    m_q = mean + z_beta * shrink

    improve = incumbent_quantile - m_q
    out = np.maximum(improve, 0.0)
    positive = s_q > 0.0
    z = np.where(positive, improve / np.where(positive, s_q, 1.0), 0.0)
    out = np.where(positive, improve * ndtr(z) + s_q * _phi(z), out)
    out = np.maximum(out, 0.0)
    if single:
        return float(out[0])
    return out


def expected_improvement(
    model: GpModel, x: np.ndarray, incumbent: float
) -> np.ndarray | float:
    """Standard EI for minimization; zero where s = 0 and m >= incumbent."""
    mean, var = model.posterior(x)
    single = np.asarray(mean).ndim == 0
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    var = np.atleast_1d(np.asarray(var, dtype=float))
    sd = np.sqrt(var)
    improve = incumbent - mean
    out = np.maximum(improve, 0.0)
    positive = sd > 0.0
    z = np.where(positive, improve / np.where(positive, sd, 1.0), 0.0)
    out = np.where(positive, improve * ndtr(z) + sd * _phi(z), out)
    out = np.maximum(out, 0.0)
    if single:
        return float(out[0])
    return out
