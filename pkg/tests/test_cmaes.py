import math

import numpy as np
import pytest

from memobo import cmaes
from memobo.seeding import derive_seed


def sphere(x):
    return float(np.sum(x**2))


def rosenbrock(x):
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


def test_default_config_popsize():
    assert cmaes.default_config(9).popsize == 10  # 4 + floor(3 ln 9)
    assert cmaes.default_config(1).popsize == 4
    assert cmaes.default_config(11).popsize == 11


def test_default_config_weights_and_state():
    st = cmaes.default_config(9)
    assert st.weights.sum() == pytest.approx(1.0)
    assert np.all(st.weights > 0)
    assert st.parents == st.popsize // 2
    assert st.step_size == pytest.approx(0.3)
    assert np.allclose(st.mean, 0.5)
    assert np.array_equal(st.cov, np.eye(9))


def test_quadratic_start_at_optimum():
    res = cmaes.minimize(
        lambda x: float((x[0] - 0.3) ** 2), np.array([0.0]), np.array([1.0]),
        budget=200, seed=1, x0=np.array([0.3]), sigma0=1e-3,
    )
    assert res.best_f <= 1e-8


def test_sphere_9d():
    res = cmaes.minimize(sphere, -5 * np.ones(9), 5 * np.ones(9), budget=5000, seed=3)
    assert res.best_f <= 1e-6


def test_rosenbrock_2d_most_seeds():
    hits = sum(
        cmaes.minimize(
            rosenbrock, -2 * np.ones(2), 2 * np.ones(2), budget=3000, seed=s
        ).best_f
        <= 1e-4
        for s in range(10)
    )
    assert hits >= 8


def test_determinism_identical_history():
    a = cmaes.minimize(sphere, -np.ones(3), np.ones(3), budget=600, seed=7)
    b = cmaes.minimize(sphere, -np.ones(3), np.ones(3), budget=600, seed=7)
    assert a.history == b.history
    assert np.array_equal(a.best_x, b.best_x)


def test_never_leaves_box():
    lo, hi = np.array([0.2, -1.0]), np.array([0.4, 2.0])
    seen = []

    def spy(x):
        seen.append(x.copy())
        return sphere(x)

    res = cmaes.minimize(spy, lo, hi, budget=400, seed=5, sigma0=0.9)
    pts = np.array(seen)
    assert np.all(pts >= lo - 1e-12) and np.all(pts <= hi + 1e-12)
    assert np.all(res.best_x >= lo) and np.all(res.best_x <= hi)


def test_non_finite_objective_rejected_but_counted():
    calls = []

    def sometimes_nan(x):
        calls.append(1)
        return math.nan if x[0] > 0.5 else sphere(x)

    res = cmaes.minimize(
        sometimes_nan, np.zeros(2), np.ones(2), budget=200, seed=2
    )
    assert len(calls) == res.n_evals
    assert math.isfinite(res.best_f)
    assert res.best_x[0] <= 0.5


def test_budget_respected():
    count = []

    def counting(x):
        count.append(1)
        return sphere(x)

    res = cmaes.minimize(counting, -np.ones(4), np.ones(4), budget=123, seed=1)
    assert len(count) <= 123
    assert res.n_evals == len(count)


def test_covariance_stays_spd():
    # run on an ill-behaved objective and check sampling never crashes;
    # the eigenvalue floor guards the decomposition internally
    def nasty(x):
        return float(np.sum(np.abs(x) ** 0.3))

    res = cmaes.minimize(nasty, -np.ones(5), np.ones(5), budget=2000, seed=9)
    assert math.isfinite(res.best_f)


def test_batch_objective_matches_scalar():
    a = cmaes.minimize(sphere, -np.ones(3), np.ones(3), budget=500, seed=4)
    b = cmaes.minimize(
        lambda pts: np.sum(pts**2, axis=1), -np.ones(3), np.ones(3),
        budget=500, seed=4, batch=True,
    )
    assert a.best_f == pytest.approx(b.best_f, abs=0)
    assert np.array_equal(a.best_x, b.best_x)


def test_restarts_return_best():
    res = cmaes.minimize_restarts(
        rosenbrock, -2 * np.ones(2), 2 * np.ones(2), budget=800, restarts=3, seed=6
    )
    singles = [
        cmaes.minimize(
            rosenbrock, -2 * np.ones(2), 2 * np.ones(2), budget=800,
            seed=derive_seed(6, "restart", r),
        )
        for r in range(3)
    ]
    assert res.best_f == pytest.approx(min(s.best_f for s in singles), abs=0)
    assert res.n_evals == sum(s.n_evals for s in singles)


def test_preconditions():
    with pytest.raises(ValueError):
        cmaes.minimize(sphere, np.ones(2), np.ones(2), budget=100, seed=1)
    with pytest.raises(ValueError):
        cmaes.minimize(sphere, np.zeros(2), np.ones(2), budget=3, seed=1)
    with pytest.raises(ValueError):
        cmaes.default_config(0)
