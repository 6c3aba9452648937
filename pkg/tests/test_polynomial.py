import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptwave.errors import ParseError
from ptwave.polynomial import Polynomial, parse_flux_expression, parse_polynomial

V2 = ("u1", "u2")


def test_cubic_expansion():
    p = parse_polynomial("u1^3 - u1", ("u1",))
    assert p.terms == ((1.0, (3,)), (-1.0, (1,)))


def test_zero_polynomial():
    p = parse_polynomial("0", ("u1",))
    assert p.terms == ()
    assert p(np.array([3.7])) == 0.0
    assert np.all(p(np.random.default_rng(0).normal(size=(1, 5))) == 0.0)


def test_square_of_sum():
    p = parse_polynomial("(u1 + u2)^2", V2)
    assert p.terms == ((1.0, (2, 0)), (2.0, (1, 1)), (1.0, (0, 2)))
    pts = np.random.default_rng(1).normal(size=(2, 20))
    np.testing.assert_allclose(p(pts), (pts[0] + pts[1]) ** 2, rtol=1e-14)


def test_like_terms_merge_and_cancel():
    p = parse_polynomial("u1*u2 + u2*u1 - 2*u1*u2 + 3", V2)
    assert p.terms == ((3.0, (0, 0)),)


def test_double_star_power_and_unary_minus():
    p = parse_polynomial("-(u1 - 2)**2", V2)
    pts = np.random.default_rng(2).normal(size=(2, 7))
    np.testing.assert_allclose(p(pts), -(pts[0] - 2) ** 2, rtol=1e-14)


def test_derivative_exact():
    p = parse_polynomial("u1^3*u2 - 4*u2^2 + 0.5", V2)
    assert p.derivative(0).terms == ((3.0, (2, 1)),)
    assert p.derivative(1).terms == ((1.0, (3, 0)), (-8.0, (0, 1)))


@pytest.mark.parametrize("text, pos", [
    ("u1 + x", 5),
    ("u1^1.5", 3),
    ("u1 + * u2", 5),
    ("(u1 + u2", 8),
    ("u1 u2", 3),
])
def test_parse_errors_carry_position(text, pos):
    with pytest.raises(ParseError) as info:
        parse_polynomial(text, V2)
    assert f"position {pos}" in str(info.value)


def test_unknown_variable_named():
    with pytest.raises(ParseError, match="u3"):
        parse_polynomial("u3", V2)


def test_negative_exponent_rejected():
    with pytest.raises(ParseError):
        parse_polynomial("u1^-1", V2)


def test_flux_expression_jacobian_and_hessian():
    F = parse_flux_expression(["u2", "u1^3 - u1"])
    u = np.array([2.0, 0.3])
    np.testing.assert_array_equal(F(u), [0.3, 6.0])
    np.testing.assert_array_equal(F.jacobian(u), [[0, 1], [11, 0]])
    H = F.hessian(u)
    assert H.shape == (2, 2, 2)
    assert H[1, 0, 0] == 12.0 and np.count_nonzero(H) == 1


coeff = st.integers(-5, 5).map(float)
monomial = st.tuples(coeff, st.tuples(st.integers(0, 3), st.integers(0, 3)))


@settings(max_examples=60, deadline=None)
@given(st.lists(monomial, max_size=6))
def test_print_parse_roundtrip(mons):
    p = Polynomial.from_dict(2, {})
    for c, e in mons:
        p = p + Polynomial.from_dict(2, {e: c})
    assert parse_polynomial(p.to_string(), V2) == p


@settings(max_examples=40, deadline=None)
@given(st.lists(monomial, min_size=1, max_size=5),
       st.tuples(st.floats(-2, 2), st.floats(-2, 2)))
def test_derivative_matches_finite_difference(mons, x):
    p = Polynomial.from_dict(2, {})
    for c, e in mons:
        p = p + Polynomial.from_dict(2, {e: c})
    x = np.array(x)
    h = 1e-6
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        fd = (p(x + e) - p(x - e)) / (2 * h)
        assert abs(fd - p.derivative(k)(x)) <= 1e-6 * (1 + abs(fd))


@settings(max_examples=40, deadline=None)
@given(st.lists(monomial, max_size=4), st.lists(monomial, max_size=4),
       st.tuples(st.floats(-2, 2), st.floats(-2, 2)))
def test_arithmetic_is_pointwise(a, b, x):
    pa = Polynomial.from_dict(2, {e: 0.0 for _, e in a})
    pb = Polynomial.from_dict(2, {})
    for c, e in a:
        pa = pa + Polynomial.from_dict(2, {e: c})
    for c, e in b:
        pb = pb + Polynomial.from_dict(2, {e: c})
    x = np.array(x)
    for op in (lambda s, t: s + t, lambda s, t: s - t, lambda s, t: s * t):
        assert np.isclose(op(pa, pb)(x), op(pa(x), pb(x)), rtol=1e-12, atol=1e-9)
