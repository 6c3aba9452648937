import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptwave.errors import ConfigError
from ptwave.oracle import (ConstCoeffSystem, char_polynomial_matrix, characteristic_roots,
                           dispersion_roots, evans_closed_form)

GENERIC_POINT_VALUE = 6010.053428276904 - 19152.07032401584j


def test_roots_at_origin(oracle_system):
    # mu = 0 is a double root, which the solver reports
    with pytest.warns(RuntimeWarning, match="nearly coincide"):
        mu = characteristic_roots(oracle_system, 0.0, [0.0])
    np.testing.assert_allclose(np.sort(mu.real), [-1, 0, 0, 1], atol=1e-12)
    np.testing.assert_allclose(mu.imag, 0, atol=1e-12)


@pytest.mark.parametrize("a, lam", [(0.7, 0.3 + 0.1j), (-2.0, -0.05), (0.0, 1j)])
def test_scalar_reduction(a, lam):
    sys = ConstCoeffSystem(A=[[[a]]], X=1.0)
    mu = characteristic_roots(sys, lam)
    r = np.sqrt(complex(a * a + 4 * lam))
    expect = np.array([(a + r) / 2, (a - r) / 2])
    assert min(abs(mu[0] - expect[0]) + abs(mu[1] - expect[1]),
               abs(mu[0] - expect[1]) + abs(mu[1] - expect[0])) <= 1e-12


@pytest.mark.filterwarnings("ignore:characteristic roots nearly coincide")
@settings(max_examples=50, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_root_residual(lr, li, xt):
    sys = ConstCoeffSystem(A=[[[0, 1], [1, 0]], [[1, 0], [0, -1]]], X=2 * np.pi)
    lam = complex(lr, li)
    for mu in characteristic_roots(sys, lam, [xt]):
        M = char_polynomial_matrix(sys, mu, lam, [xt])
        assert abs(np.linalg.det(M)) <= 1e-9 * max(1.0, abs(mu)) ** 4


def test_constructed_root_gives_zero(oracle_system):
    xi1, xi2 = 0.3, 0.4
    mu = 1j * xi1
    A1, A2 = oracle_system.A
    lam = np.linalg.eigvals(mu**2 * np.eye(2) - mu * A1 - 1j * xi2 * A2 - xi2**2 * np.eye(2))[0]
    mu_all = characteristic_roots(oracle_system, lam, [xi2])
    scale = np.prod(np.abs(np.exp(mu_all * oracle_system.X)) + 1)
    assert abs(evans_closed_form(oracle_system, lam, xi1, [xi2])) <= 1e-12 * scale


def test_zero_at_origin(oracle_system):
    assert abs(evans_closed_form(oracle_system, 0.0, 0.0, [0.0])) <= 1e-12


def test_generic_point_regression(oracle_system):
    val = evans_closed_form(oracle_system, 0.1 + 0.2j, 0.3, [0.4])
    assert val == pytest.approx(GENERIC_POINT_VALUE, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.integers(-3, 3))
def test_periodic_in_xi1(xi1, lam, k):
    sys = ConstCoeffSystem(A=[[[0, 1], [1, 0]], [[1, 0], [0, -1]]], X=2 * np.pi)
    a = evans_closed_form(sys, lam, xi1, [0.2])
    b = evans_closed_form(sys, lam, xi1 + k * 2 * np.pi / sys.X, [0.2])
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


def test_dispersion_roots(oracle_system):
    np.testing.assert_allclose(dispersion_roots(oracle_system, [0.0, 0.0]), 0, atol=0)
    lam = dispersion_roots(oracle_system, [1.0, 0.0])
    np.testing.assert_allclose(np.sort_complex(lam), [-1 - 1j, -1 + 1j], atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 2 * np.pi), st.floats(0.01, 3))
def test_dispersion_stable_for_symmetric_pencil(theta, r):
    sys = ConstCoeffSystem(A=[[[0, 1], [1, 0]], [[1, 0], [0, -1]]], X=2 * np.pi)
    xi = r * np.array([np.cos(theta), np.sin(theta)])
    lam = dispersion_roots(sys, xi)
    np.testing.assert_allclose(lam.real, -r * r, atol=1e-12 * (1 + r * r))
    Axi = xi[0] * sys.A[0] + xi[1] * sys.A[1]
    np.testing.assert_allclose(np.sort(-lam.imag), np.sort(np.linalg.eigvalsh(Axi)), atol=1e-12)


def test_invalid_systems():
    with pytest.raises(ConfigError):
        ConstCoeffSystem(A=[[[0, 1], [1, 0]]], B=[[[[1, 0], [0, 0]]]])
    with pytest.raises(ConfigError):
        ConstCoeffSystem(A=[[[0, 1], [1, 0]]], X=0.0)
