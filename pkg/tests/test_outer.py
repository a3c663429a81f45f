from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from adversarial_ka.exact import GammaNumber, gamma_basis
from adversarial_ka.outer import (BoundError, CollisionError, build_outer, build_outer_arrays, eval_outer,
                                  lipschitz, sum_outer, sup_norm_outer)

B2 = gamma_basis(2)


def test_interpolates_between_knots():
    g = build_outer([(0.0, 0.0), (1.0, 1.0)], B=1)
    assert g(0.25) == 0.25
    assert g(-3.0) == 0.0 and g(7.0) == 1.0


def test_empty_is_zero():
    g = build_outer([], B=1)
    assert g(0.3) == 0.0
    assert np.array_equal(g(np.array([0.1, 0.2])), np.zeros(2))


def test_bound_enforced():
    with pytest.raises(BoundError):
        build_outer([(0.0, 2.0)], B=1)


def test_conflicting_values_collide():
    with pytest.raises(CollisionError):
        build_outer([(0.5, 0.1), (0.5, 0.2)], B=1)
    assert len(build_outer([(0.5, 0.1), (0.5, 0.1)], B=1)) == 1


def test_exact_positions_ordered_by_exact_comparison():
    # 140/99 < sqrt(2) by about 7e-5; 665857/470832 > sqrt(2) by about 1.6e-12
    lo = GammaNumber(B2, [F(140, 99), 0])
    root = GammaNumber(B2, [0, 1])
    hi = GammaNumber(B2, [F(665857, 470832), 0])
    g = build_outer([(hi, 0.3), (root, 0.2), (lo, 0.1)], B=1)
    assert list(g.values) == [0.1, 0.2, 0.3]
    assert g.exact == (lo, root, hi)


def test_exact_equal_positions_merge():
    a = GammaNumber(B2, [F(1, 3), F(1, 5)])
    g = build_outer([(a, 0.1), (GammaNumber(B2, [F(2, 6), F(1, 5)]), 0.1)], B=1)
    assert len(g) == 1
    with pytest.raises(CollisionError):
        build_outer([(a, 0.1), (a, 0.2)], B=1)


def test_array_builder_rejects_float_ties():
    with pytest.raises(CollisionError):
        build_outer_arrays(np.array([0.2, 0.2]), np.array([0.0, 0.1]), 1)


def test_lipschitz_and_norm():
    g = build_outer([(0.0, 0.0), (0.5, 0.25), (1.0, -0.25)], B=1)
    assert lipschitz(g) == 1.0
    assert sup_norm_outer(g) == 0.25


def test_scaled_and_csv():
    g = build_outer([(0.0, 0.5), (1.0, -0.5)], B=0.5).scaled(2)
    assert g.bound == 1.0 and list(g.values) == [1.0, -1.0]
    lines = g.to_csv().splitlines()
    assert lines[0] == "position_float,position_exact,value"
    assert len(lines) == 3


def knot_lists():
    return st.lists(st.tuples(st.floats(-5, 5), st.floats(-1, 1)), min_size=1, max_size=12,
                    unique_by=lambda kv: kv[0])


@settings(max_examples=100, deadline=None)
@given(knot_lists(), knot_lists(), st.lists(st.floats(-6, 6), min_size=1, max_size=20))
def test_sum_is_pointwise(ka, kb, ts):
    ga, gb = build_outer(ka, B=1), build_outer(kb, B=1)
    s = sum_outer([ga, gb])
    ts = np.array(ts)
    assert np.allclose(s(ts), ga(ts) + gb(ts), atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(knot_lists(), st.floats(-6, 6))
def test_values_bounded_by_knot_range(knots, t):
    g = build_outer(knots, B=1)
    assert min(g.values) - 1e-15 <= g(t) <= max(g.values) + 1e-15


@settings(max_examples=100, deadline=None)
@given(knot_lists(), st.floats(-6, 6), st.floats(-6, 6))
def test_lipschitz_bounds_increments(knots, s, t):
    assume(s != t)
    g = build_outer(knots, B=1)
    assert abs(g(s) - g(t)) <= lipschitz(g) * abs(s - t) * (1 + 1e-9) + 1e-12


@settings(max_examples=100, deadline=None)
@given(knot_lists())
def test_knots_reproduced(knots):
    g = build_outer(knots, B=1)
    for p, v in knots:
        assert eval_outer(g, p) == v
