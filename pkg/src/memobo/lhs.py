"""Maximin Latin Hypercube designs for the initial exploration phase.

A Latin Hypercube of n points stratifies every axis into n equal bins with
exactly one point per bin. The maximin variant draws several random
hypercubes and keeps the one with the largest minimum pairwise distance,
which spreads the initial evaluations more evenly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .seeding import make_rng


@dataclass(frozen=True)
class DesignMatrix:
    """n x m design with one point per axis stratum in every dimension."""

    points: np.ndarray
    n: int
    m: int

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.shape != (self.n, self.m):
            raise ValueError(f"points shape {pts.shape} != ({self.n}, {self.m})")
        object.__setattr__(self, "points", pts)


def _random_lhs(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    # one permutation of strata per axis, uniform jitter within each stratum
    sample = np.empty((n, m))
    for j in range(m):
        perm = rng.permutation(n)
        sample[:, j] = (perm + rng.random(n)) / n
    return sample


def min_pairwise_distance(design: DesignMatrix | np.ndarray) -> float:
    """Exact minimum Euclidean distance over all point pairs (n >= 2)."""
    pts = design.points if isinstance(design, DesignMatrix) else np.asarray(design)
    n = pts.shape[0]
    if n < 2:
        raise ValueError("min pairwise distance needs at least 2 points")
    sq = np.sum(pts**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (pts @ pts.T)
    iu = np.triu_indices(n, k=1)
    return float(np.sqrt(max(np.min(d2[iu]), 0.0)))


def maximin_lhs(n: int, m: int, seed: int, restarts: int = 100) -> DesignMatrix:
    """Best-of-`restarts` random Latin Hypercube by minimum pairwise distance.

    Candidates are drawn sequentially from a single seeded stream, so the
    result with `restarts=r` considers exactly the first r candidates of the
    stream: growing `restarts` can only improve the minimum distance.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    rng = make_rng(seed)
    best_pts: np.ndarray | None = None
    best_dist = -np.inf
    for _ in range(restarts):
        pts = _random_lhs(n, m, rng)
        if n == 1:
            best_pts = pts if best_pts is None else best_pts
            continue
        dist = min_pairwise_distance(pts)
        if dist > best_dist:
            best_dist = dist
            best_pts = pts
    assert best_pts is not None
    return DesignMatrix(points=best_pts, n=n, m=m)
