import math

import numpy as np
import pytest

from memobo import lhs


def brute_force_min_distance(points: np.ndarray) -> float:
    best = math.inf
    n = len(points)
    for i in range(n):
        for j in range(i + 1, n):
            best = min(best, math.dist(points[i], points[j]))
    return best


def assert_stratified(points: np.ndarray) -> None:
    n, m = points.shape
    for j in range(m):
        strata = np.floor(points[:, j] * n).astype(int)
        strata = np.minimum(strata, n - 1)
        assert sorted(strata) == list(range(n)), f"dimension {j} not stratified"


def test_single_point_single_dim():
    d = lhs.maximin_lhs(1, 1, seed=0)
    assert d.points.shape == (1, 1)
    assert 0.0 <= d.points[0, 0] <= 1.0


def test_stratification_10x9():
    d = lhs.maximin_lhs(10, 9, seed=42)
    assert_stratified(d.points)


def test_determinism():
    a = lhs.maximin_lhs(10, 4, seed=5, restarts=20)
    b = lhs.maximin_lhs(10, 4, seed=5, restarts=20)
    assert np.array_equal(a.points, b.points)
    c = lhs.maximin_lhs(10, 4, seed=6, restarts=20)
    assert not np.array_equal(a.points, c.points)


def test_restarts_improve_over_first_candidate():
    one = lhs.maximin_lhs(10, 2, seed=9, restarts=1)
    fifty = lhs.maximin_lhs(10, 2, seed=9, restarts=50)
    assert lhs.min_pairwise_distance(fifty) >= lhs.min_pairwise_distance(one)


def test_restart_monotonicity_chain():
    prev = -1.0
    for restarts in (1, 2, 5, 10, 25, 50):
        d = lhs.maximin_lhs(8, 3, seed=11, restarts=restarts)
        dist = lhs.min_pairwise_distance(d)
        assert dist >= prev
        prev = dist


def test_min_distance_trivial_pairs():
    pts = np.array([[0.0, 0.0], [1.0, 1.0]])
    assert lhs.min_pairwise_distance(pts) == pytest.approx(math.sqrt(2))
    same = np.array([[0.3, 0.3], [0.3, 0.3]])
    assert lhs.min_pairwise_distance(same) == 0.0


def test_min_distance_matches_brute_force():
    rng = np.random.default_rng(2)
    for _ in range(20):
        pts = rng.random((5, 3))
        assert lhs.min_pairwise_distance(pts) == pytest.approx(
            brute_force_min_distance(pts), abs=1e-12
        )


def test_min_distance_needs_two_points():
    with pytest.raises(ValueError):
        lhs.min_pairwise_distance(np.array([[0.5, 0.5]]))


def test_preconditions():
    with pytest.raises(ValueError):
        lhs.maximin_lhs(0, 3, seed=1)
    with pytest.raises(ValueError):
        lhs.maximin_lhs(3, 0, seed=1)
    with pytest.raises(ValueError):
        lhs.maximin_lhs(3, 3, seed=1, restarts=0)
