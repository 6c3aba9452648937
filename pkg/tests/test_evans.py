import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptwave.errors import ConfigError, ContourError
from ptwave.evans import (EvansFunction, count_roots, eigen_ode_coefficients, evans_basis,
                          evans_eval, find_roots, roots_in_disk, track_roots, winding_number,
                          circle)
from ptwave.oracle import characteristic_roots, evans_closed_form, evans_normalization
from ptwave.profile import constant_profile


@pytest.fixture(scope="module")
def oracle_evans(oracle_system):
    sys = oracle_system.to_system()
    prof = constant_profile(sys, [0.0, 0.0], oracle_system.X)
    return EvansFunction(sys, prof)


POINTS = [(0.01 + 0.02j, 0.003, 0.004), (0.3 - 0.1j, 0.2, -0.1), (-0.02 + 0.0j, -0.01, 0.02)]


@pytest.mark.parametrize("lam, xi1, xt", POINTS)
def test_magnus_adaptive_columnwise_agree(vdw, vdw_evans, lam, xi1, xt):
    ref = EvansFunction(*vdw, method="adaptive")(lam, xi1, [xt])
    a = vdw_evans(lam, xi1, [xt])
    c = vdw_evans.columnwise(lam, xi1, [xt])
    assert abs(a - ref) <= 1e-10 * abs(ref)
    assert abs(c - a) <= 1e-10 * abs(a)


def test_vectorized_over_lambda(vdw_evans):
    lam = np.array([[0.01, 0.02j], [-0.03 + 0.01j, 0.1]])
    D = vdw_evans(lam, 0.01, [0.02])
    assert D.shape == (2, 2)
    for idx in np.ndindex(2, 2):
        assert D[idx] == pytest.approx(vdw_evans(lam[idx], 0.01, [0.02]), rel=1e-12)


def test_zero_at_origin(vdw_evans):
    scale = np.abs(vdw_evans(1e-2 * np.exp(2j * np.pi * np.arange(8) / 8), 0.0, [0.0])).max()
    assert abs(vdw_evans(0.0, 0.0, [0.0])) <= 1e-8 * scale


@settings(max_examples=15, deadline=None)
@given(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))
def test_conjugate_symmetry(vdw_evans, lr, li, x1, x2):
    a = vdw_evans(complex(lr, li), x1, [x2])
    b = vdw_evans(complex(lr, -li), -x1, [-x2])
    assert abs(a - np.conj(b)) <= 1e-10 * max(abs(a), 1e-12)


@settings(max_examples=10, deadline=None)
@given(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.integers(-2, 2))
def test_periodic_in_xi1(vdw, vdw_evans, x1, lr, k):
    X = vdw[1].X
    a = vdw_evans(complex(lr, 0.1), x1, [0.05])
    b = vdw_evans(complex(lr, 0.1), x1 + 2 * np.pi * k / X, [0.05])
    assert abs(a - b) <= 1e-10 * max(abs(a), 1e-12)


def test_mean_value_property(vdw_evans):
    c, r, N = 0.02 + 0.01j, 5e-3, 64
    z = c + r * np.exp(2j * np.pi * np.arange(N) / N)
    avg = np.mean(vdw_evans(z, 0.01, [0.0]))
    ref = vdw_evans(c, 0.01, [0.0])
    assert abs(avg - ref) <= 1e-8 * abs(ref)


def test_basis_recombination_scales_determinant(vdw_evans):
    lam, xi1, xt = 0.03 + 0.01j, 0.02, [0.01]
    W0, WX = vdw_evans.basis_columns(lam, xt)
    R = np.random.default_rng(3).normal(size=(4, 4))
    e = np.exp(1j * vdw_evans.profile.X * xi1)
    D = np.linalg.det(WX - e * W0)
    DR = np.linalg.det(WX @ R - e * W0 @ R)
    assert DR == pytest.approx(np.linalg.det(R) * D, rel=1e-10)


def test_normalized_initial_data(vdw):
    sys, prof = vdw
    x, W = evans_basis(sys, prof, 0.02 + 0.01j, [0.03])
    A1 = np.asarray(sys.df(0, prof.samples[0]))
    np.testing.assert_allclose(W[0][:2, :2], np.eye(2), atol=1e-15)
    np.testing.assert_allclose(W[0][2:, :2], A1, atol=1e-14)
    np.testing.assert_allclose(W[0][:2, 2:], 0, atol=1e-15)
    np.testing.assert_allclose(W[0][2:, 2:], -np.eye(2), atol=1e-15)
    assert x[-1] == prof.X


def test_basis_solves_eigenvalue_ode(vdw):
    """Each basis column solves (w, w')' = C(x) (w, w')."""
    sys, prof = vdw
    lam, xt = 0.02 + 0.01j, [0.03]
    x, W = evans_basis(sys, prof, lam, xt)
    C = eigen_ode_coefficients(sys, prof, lam, xt)(x)
    # W is not periodic: fourth-order differences on interior points
    h = x[1] - x[0]
    dW = (W[:-4] - 8 * W[1:-3] + 8 * W[3:-1] - W[4:]) / (12 * h)
    res = dW - np.einsum("xij,xjk->xik", C[2:-2], W[2:-2])
    assert np.abs(res).max() <= 1e-6 * np.abs(W).max()


def test_coefficients_structure(oracle_system, vdw):
    sys = oracle_system.to_system()
    prof = constant_profile(sys, [0.0, 0.0], oracle_system.X)
    C = eigen_ode_coefficients(sys, prof, 0.0, [0.0])(np.array([0.0, 1.0, 2.5]))
    A1 = oracle_system.A[0]
    expect = np.block([[np.zeros((2, 2)), np.eye(2)], [np.zeros((2, 2)), A1]])
    for Cx in C:
        np.testing.assert_allclose(Cx, expect, atol=1e-14)
    # affine in lam on a varying profile
    vs, vp = vdw
    x = vp.grid[::37]
    Cs = [eigen_ode_coefficients(vs, vp, lam, [0.2])(x) for lam in (0.0, 0.5, 1.0 + 0.3j)]
    slope = (Cs[1] - Cs[0]) / 0.5
    np.testing.assert_allclose(Cs[2], Cs[0] + (1.0 + 0.3j) * slope, atol=1e-11)


@pytest.mark.parametrize("lam, xi1, xt", [(0.1 + 0.2j, 0.3, 0.4), (-0.5, 0.0, 0.5), (0.2j, -0.4, 0.1)])
def test_oracle_point(oracle_system, oracle_evans, lam, xi1, xt):
    ref = evans_normalization(oracle_system) * evans_closed_form(oracle_system, lam, xi1, [xt])
    assert abs(oracle_evans(lam, xi1, [xt]) - ref) <= 1e-8 * abs(ref)


def test_evans_value_record(vdw):
    v = evans_eval(*vdw, 0.01 + 0.01j, 0.002, [0.001])
    assert v.value == v.D and v.log_scale == 0.0
    assert v.xi_t == (0.001,)


def test_bad_transverse_size(vdw_evans):
    with pytest.raises(ConfigError):
        vdw_evans(0.1, 0.0, [0.1, 0.2])


def test_unknown_method(vdw):
    with pytest.raises(ConfigError):
        EvansFunction(*vdw, method="euler")


def test_roots_in_disk_polynomial():
    roots = np.array([0.1 + 0.2j, -0.3j, 0.25, 0.7 + 0.7j])
    f = lambda z: np.prod(np.asarray(z)[..., None] - roots, axis=-1)
    z = roots_in_disk(f, 0.0, 0.5)
    np.testing.assert_allclose(z, np.sort_complex(roots[:3]), atol=1e-12)
    assert winding_number(f, circle(0.0, 0.5)) == 3
    assert winding_number(f, circle(0.7 + 0.7j, 0.05)) == 1


def test_winding_refuses_root_on_contour():
    with pytest.raises(ContourError):
        winding_number(lambda z: np.asarray(z) - 0.5, circle(0.0, 0.5))


def test_oracle_root_counts(oracle_system, oracle_evans):
    """Winding count equals the closed-form root enumeration in a disk."""
    xi1, xt = 0.1, [0.2]
    center, radius = -0.05 + 0.0j, 0.3
    ref = roots_in_disk(lambda l: np.array([evans_closed_form(oracle_system, x, xi1, xt)
                                            for x in np.atleast_1d(l)]), center, radius)
    assert count_roots(oracle_evans, [xi1, xt[0]], center=center, radius=radius) == ref.size
    assert ref.size >= 1


def test_no_roots_in_tiny_contour(vdw_evans):
    assert count_roots(vdw_evans, [0.0, 0.0], center=0.05 + 0.05j, radius=1e-3) == 0


def test_find_roots_at_origin_cluster(vdw_evans):
    z = find_roots(vdw_evans, [0.0, 0.0], radius=1e-2)
    # three roots at the origin plus the small Floquet root of this fixture
    assert z.size == 4
    assert np.sort(np.abs(z))[2] <= 1e-5


def test_track_roots_oracle(oracle_system, oracle_evans):
    xi_hat = np.array([np.cos(0.7), np.sin(0.7)])
    rho = 1e-3 * 2.0 ** -np.arange(4)
    # without a profile only the n dispersion roots leave the origin
    br = track_roots(oracle_evans, xi_hat, rho, radius=3.0, expected=2)
    assert br.matched and br.counts == [2] * 4
    Axi = xi_hat[0] * oracle_system.A[0] + xi_hat[1] * oracle_system.A[1]
    expect = -1j * np.linalg.eigvalsh(Axi)
    dev = np.abs(np.sort_complex(br.limits)[:, None] - expect[None, :]).min(axis=1)
    assert dev.max() <= 1e-6
