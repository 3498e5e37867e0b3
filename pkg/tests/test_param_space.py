import numpy as np
import pytest

from memobo import param_space
from memobo.param_space import (
    BoundsViolationError,
    ParameterBound,
    ParameterSpace,
    ParamVector,
    default_space,
)

DEFAULT_RANGES = {
    "p1": (-20.0, 20.0), "p2": (5.0, 15.0), "p3": (16.0, 100.0),
    "p4": (5.0, 30.0), "p5": (5.0, 30.0), "p6": (5.0, 40.0),
    "p7": (30.0, 300.0), "p8": (5.0, 20.0), "p9": (1.0, 10.0),
}


def test_default_space_matches_published_ranges():
    sp = default_space()
    assert sp.dimension == 9
    for b in sp.bounds:
        assert (b.lower, b.upper) == DEFAULT_RANGES[b.name]


def test_bound_validation():
    with pytest.raises(ValueError):
        ParameterBound("x", 1.0, 1.0)
    with pytest.raises(ValueError):
        ParameterBound("", 0.0, 1.0)
    with pytest.raises(ValueError):
        ParameterSpace((ParameterBound("a", 0, 1), ParameterBound("a", 0, 1)))


def test_scale_lower_edge_is_zero():
    sp = default_space()
    v = sp.lower.copy()
    v[0] = -20.0
    u = param_space.scale(sp, v)
    assert u[0] == 0.0


def test_scale_midpoint_is_half():
    sp = default_space()
    mid = 0.5 * (sp.lower + sp.upper)
    assert np.allclose(param_space.scale(sp, mid), 0.5)


def test_scale_p7_165_is_half():
    # (165 - 30) / 270 by hand
    sp = default_space()
    mid = 0.5 * (sp.lower + sp.upper)
    mid[6] = 165.0
    assert param_space.scale(sp, mid)[6] == pytest.approx(0.5, abs=1e-15)


def test_scale_out_of_bounds_names_parameter():
    sp = default_space()
    v = 0.5 * (sp.lower + sp.upper)
    v[6] = 301.0
    with pytest.raises(BoundsViolationError, match="p7"):
        param_space.scale(sp, v)


def test_unscale_edges_hit_bounds_exactly():
    sp = default_space()
    assert np.array_equal(param_space.unscale(sp, np.zeros(9)), sp.lower)
    assert np.array_equal(param_space.unscale(sp, np.ones(9)), sp.upper)


def test_unscale_rejects_outside_unit_cube():
    sp = default_space()
    u = np.full(9, 0.5)
    u[3] = 1.0001
    with pytest.raises(BoundsViolationError):
        param_space.unscale(sp, u)


def test_round_trip_identity_100_random_vectors():
    sp = default_space()
    rng = np.random.default_rng(7)
    for _ in range(100):
        u = rng.random(9)
        v = param_space.unscale(sp, u)
        u2 = param_space.scale(sp, v)
        assert np.allclose(u2, u, rtol=1e-12, atol=1e-12)
        v2 = param_space.unscale(sp, u2)
        assert np.allclose(v2, v, rtol=1e-12, atol=0)


def test_param_vector_validates():
    sp = default_space()
    with pytest.raises(BoundsViolationError):
        ParamVector(tuple([0.0] * 9), sp)  # p2 lower bound is 5
    pv = ParamVector(tuple(0.5 * (sp.lower + sp.upper)), sp)
    assert pv.as_array().shape == (9,)


C2_ROW = {
    "p2": (8.0, 15.0), "p3": (46.0, 92.0), "p5": (13.0, 30.0),
    "p6": (24.0, 37.0), "p7": (100.0, 220.0), "p8": (5.0, 15.0),
    "p9": (3.0, 9.0),
}


def test_restrict_applies_reduced_rows():
    sp = default_space()
    restricted = param_space.restrict(sp, C2_ROW)
    by_name = {b.name: b for b in restricted.bounds}
    assert (by_name["p2"].lower, by_name["p2"].upper) == (8.0, 15.0)
    assert (by_name["p7"].lower, by_name["p7"].upper) == (100.0, 220.0)
    assert (by_name["p1"].lower, by_name["p1"].upper) == (-20.0, 20.0)
    # original untouched
    assert default_space().bounds == sp.bounds


def test_restrict_identity():
    sp = default_space()
    same = param_space.restrict(sp, {b.name: (b.lower, b.upper) for b in sp.bounds})
    assert same.bounds == sp.bounds


def test_restrict_rejects_inverted_and_non_nested():
    sp = default_space()
    with pytest.raises(BoundsViolationError):
        param_space.restrict(sp, {"p2": (12.0, 8.0)})
    with pytest.raises(BoundsViolationError):
        param_space.restrict(sp, {"p2": (4.0, 15.0)})


def test_restrict_never_widens_random_cases():
    sp = default_space()
    rng = np.random.default_rng(3)
    for _ in range(50):
        reduced = {}
        for b in sp.bounds:
            a, c = np.sort(rng.uniform(b.lower, b.upper, size=2))
            if a < c:
                reduced[b.name] = (float(a), float(c))
        out = param_space.restrict(sp, reduced)
        for ob, nb in zip(sp.bounds, out.bounds):
            assert nb.lower >= ob.lower and nb.upper <= ob.upper


def test_space_serialization_round_trip():
    sp = default_space()
    text = param_space.serialize_space(sp)
    back = param_space.parse_space(text)
    assert back == sp
    assert text.splitlines()[0] == "space default"
    assert len(text.splitlines()) == 10
