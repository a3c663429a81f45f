import math
from fractions import Fraction as F

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adversarial_ka.exact import (BasisMismatchError, GammaNumber, InvalidDimensionError, gamma_basis,
                                  gn_add, gn_compare, gn_to_float)

B2 = gamma_basis(2)
B3 = gamma_basis(3)


def gn(basis, *coeffs):
    return GammaNumber(basis, coeffs)


def oracle_value(a: GammaNumber):
    with mpmath.workprec(256):
        return sum(mpmath.sqrt(r) * mpmath.mpf(c.numerator) / c.denominator
                   for r, c in zip(a.basis.radicands, a.coeffs))


def test_basis_two_and_three():
    assert B2.radicands == (1, 2)
    assert B3.radicands == (1, 2, 3)
    assert B3.floats[1] == math.sqrt(2)


def test_basis_rejects_n_one():
    with pytest.raises(InvalidDimensionError):
        gamma_basis(1)


def test_add_componentwise():
    assert gn_add(gn(B2, F(1, 2), 0), gn(B2, 0, F(1, 3))) == gn(B2, F(1, 2), F(1, 3))


def test_add_zero_and_inverse():
    a = gn(B2, F(1, 3), F(1, 2))
    assert a + B2.zero() == a
    assert gn_add(a, gn(B2, F(-1, 3), F(-1, 2))) == B2.zero()


def test_add_basis_mismatch():
    with pytest.raises(BasisMismatchError):
        gn_add(B2.zero(), B3.zero())


def test_compare_equal_coefficients():
    a = gn(B2, F(1, 2), F(1, 3))
    assert gn_compare(a, gn(B2, F(1, 2), F(1, 3))) == 0


def test_compare_sqrt2_five_sevenths_above_one():
    assert gn_compare(gn(B2, 0, F(5, 7)), gn(B2, 1, 0)) == 1


def test_compare_near_collision_140_over_99():
    assert gn_compare(gn(B2, F(140, 99), 0), gn(B2, 0, 1)) == -1


def test_compare_very_close_convergent():
    # 665857/470832 is a continued-fraction convergent of sqrt(2); the gap is ~1e-12
    a = gn(B2, F(665857, 470832), 0)
    b = gn(B2, 0, 1)
    assert gn_compare(a, b) == (1 if oracle_value(a) > oracle_value(b) else -1)


def test_to_float_examples():
    assert gn_to_float(B2.zero()) == 0.0
    assert gn_to_float(gn(B2, 1, 1)) == pytest.approx(float(1 + mpmath.sqrt(2)), abs=1e-15)
    assert gn_to_float(gn(B2, F(1, 3), 0)) == pytest.approx(0.333333333, abs=1e-9)


def test_serialization_roundtrip():
    a = gn(B3, F(-2, 7), F(5, 3), 0)
    assert a.to_strings() == ["-2/7", "5/3", "0/1"]
    assert GammaNumber.from_strings(B3, a.to_strings()) == a


def test_immutable():
    a = gn(B2, 1, 2)
    with pytest.raises(AttributeError):
        a.coeffs = (0, 0)


fractions = st.fractions(min_value=-50, max_value=50, max_denominator=10**6)


@settings(max_examples=300, deadline=None)
@given(st.lists(fractions, min_size=3, max_size=3), st.lists(fractions, min_size=3, max_size=3))
def test_compare_matches_high_precision_oracle(ca, cb):
    a, b = GammaNumber(B3, ca), GammaNumber(B3, cb)
    got = gn_compare(a, b)
    if ca == cb:
        assert got == 0
    else:
        va, vb = oracle_value(a), oracle_value(b)
        assert got != 0
        assert got == (1 if va > vb else -1)


@settings(max_examples=100, deadline=None)
@given(st.lists(fractions, min_size=2, max_size=2), st.lists(fractions, min_size=2, max_size=2),
       st.lists(fractions, min_size=2, max_size=2))
def test_add_associative_commutative(ca, cb, cc):
    a, b, c = (GammaNumber(B2, x) for x in (ca, cb, cc))
    assert (a + b) + c == a + (b + c)
    assert a + b == b + a
    assert gn_compare(a, a) == 0


@settings(max_examples=100, deadline=None)
@given(st.lists(fractions, min_size=3, max_size=3))
def test_to_float_close_to_oracle(c):
    a = GammaNumber(B3, c)
    terms = [float(q) * g for q, g in zip(a.coeffs, B3.floats)]
    partial, tol = 0.0, 0.0
    for t in terms:
        partial += t
        tol += 4 * (math.ulp(abs(partial)) + math.ulp(abs(t)))
    assert abs(gn_to_float(a) - float(oracle_value(a))) <= tol
