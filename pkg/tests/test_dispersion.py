import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptwave.dispersion import (check_nondegenerate, constrained_characteristics, delta,
                               delta_deflated, delta_hat, delta_polynomial_roots,
                               eigenvalue_error_bounds, hyperbolicity_verdict, ray_limits)
from ptwave.errors import NondegeneracyError
from ptwave.manifold import HomogenizedJacobians


def synthetic(S1, S2, c, P=None):
    """n = d = 2 pencil with the curl structure: g-rows of Q_j are e_j (x) (c, 0)."""
    n, d = 2, 2
    Q = np.zeros((d, n + d, n + d))
    for j, S in enumerate((S1, S2)):
        Q[j, :n, :n] = S
        Q[j, :n, n + j] = c
        Q[j, n + j, :n] = c
    P = np.eye(n + d) if P is None else P
    # curl structure is preserved by right-multiplying the pencil with P
    return HomogenizedJacobians.synthetic(P, np.einsum("jab,bc->jac", Q, P))


SYM = synthetic(np.array([[1.0, 0.5], [0.5, -1.0]]), np.array([[0.0, 1.0], [1.0, 2.0]]),
                np.array([0.3, -0.7]),
                P=np.array([[2, 0.1, 0, 0.3], [0, 1, 0.2, 0], [0.1, 0, 1.5, 0], [0, 0.4, 0, 1]]))
ROT = synthetic(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.array([[0.0, 2.0], [-2.0, 0.0]]),
                np.zeros(2))


def test_symmetric_pencil_hyperbolic():
    rep = hyperbolicity_verdict(SYM)
    assert rep.weakly_hyperbolic and rep.root_verdict
    assert rep.worst_value == 0.0 and rep.worst_direction is None
    for r in rep.directions:
        assert r.zero_modes == 1
        assert r.max_imag <= 1e-12 * r.norm


def test_rotation_pencil_not_hyperbolic():
    rep = hyperbolicity_verdict(ROT)
    assert not rep.weakly_hyperbolic and rep.root_verdict is False
    assert rep.worst_value > 0.5


def test_degenerate_pencil_rejected():
    H = HomogenizedJacobians.synthetic(np.diag([1.0, 1.0, 1.0, 0.0]), SYM.Q)
    with pytest.raises(NondegeneracyError, match="nondegeneracy"):
        check_nondegenerate(H)
    with pytest.raises(NondegeneracyError):
        hyperbolicity_verdict(H)


def test_delta_hat_at_zero_xi(generic_H):
    lam = 0.3 - 0.2j
    assert delta_hat(generic_H, [0.0, 0.0], lam) == pytest.approx(
        lam**4 * np.linalg.det(generic_H.P), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2),
       st.floats(0.1, 5))
def test_homogeneity(x1, x2, lr, li, t):
    H = SYM
    xi, lam = np.array([x1, x2]), complex(lr, li)
    a = delta_hat(H, t * xi, t * lam)
    b = t**4 * delta_hat(H, xi, lam)
    # cancellation floor: the entries of the pencil are O(t (|xi| + |lam|))
    size = t * (np.abs(xi).sum() + abs(lam)) * 5
    assert abs(a - b) <= 1e-10 * max(abs(b), size**4 * 1e-3)
    if abs(lam) > 1e-3:
        a = delta(H, t * xi, t * lam)
        b = t**3 * delta(H, xi, lam)
        assert abs(a - b) <= 1e-10 * max(abs(b), size**3 * 1e-3)


def test_deflated_matches_division(generic_H):
    xi = np.array([0.6, -0.8])
    for lam in (0.5 + 0.1j, -0.02j, 1.3):
        assert delta_deflated(generic_H, xi, lam) == pytest.approx(
            delta_hat(generic_H, xi, lam) / lam, rel=1e-9)
    assert np.isfinite(delta(generic_H, xi, 0.0))


def test_large_lambda_leading_coefficient(generic_H):
    xi = np.array([0.6, -0.8])
    lam = 1e6 * np.exp(0.4j)
    assert delta(generic_H, xi, lam) / lam**3 == pytest.approx(np.linalg.det(generic_H.P), rel=1e-6)


@pytest.mark.parametrize("fixture", ["vdw_H", "generic_H"])
def test_ray_limits_finite(request, fixture):
    H = request.getfixturevalue(fixture)
    for theta in np.linspace(0.1, 3.0, 5):
        xi = np.array([np.cos(theta), np.sin(theta)])
        lims, spread = ray_limits(H, xi, rays=10)
        assert spread <= 1e-6
        assert lims.mean() == pytest.approx(delta_deflated(H, xi, 0.0), rel=1e-6)


def test_spectrum_splits_into_constrained_and_zero(generic_H):
    for theta in np.linspace(0.05, 2 * np.pi, 9):
        xi = np.array([np.cos(theta), np.sin(theta)])
        ch = constrained_characteristics(generic_H, xi)
        assert ch.zero_modes == 1
        assert np.abs(ch.complementary).max() <= 1e-7 * ch.norm
        assert ch.invariance_residual <= 1e-8
        # eigenvalue-set match of full calA against restricted plus one zero
        merged = np.sort_complex(np.concatenate([ch.a, [0.0]]))
        assert np.abs(np.sort_complex(ch.full) - merged).max() <= 1e-7 * ch.norm


def test_delta_roots_are_characteristics(generic_H):
    xi = np.array([0.8, 0.6])
    ch = constrained_characteristics(generic_H, xi)
    lam = np.sort_complex(delta_polynomial_roots(generic_H, xi))
    expect = np.sort_complex(-1j * ch.a)
    dist = np.abs(lam[:, None] - expect[None, :]).min(axis=0)
    assert dist.max() <= 1e-7 * ch.norm
    for l in expect:
        assert abs(delta(generic_H, xi, l)) <= 1e-9 * abs(delta(generic_H, xi, abs(l) + 1))


def test_conjugate_pairs_exact(generic_H):
    for theta in (0.3, 1.1, 2.9):
        a = constrained_characteristics(generic_H, [np.cos(theta), np.sin(theta)]).a
        assert set(a.tolist()) == set(np.conj(a).tolist())


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 2 * np.pi), st.floats(0.05, 20))
def test_characteristics_degree_one(theta, t):
    xi = np.array([np.cos(theta), np.sin(theta)])
    a = constrained_characteristics(SYM, xi).a
    b = constrained_characteristics(SYM, t * xi).a
    np.testing.assert_allclose(np.sort_complex(b), np.sort_complex(t * a), atol=1e-10 * t * (1 + np.abs(a).max()))


def test_vdw_hyperbolicity_fixture(vdw_H):
    rep = hyperbolicity_verdict(vdw_H)
    assert rep.weakly_hyperbolic is True
    assert rep.root_verdict is True
    assert len(rep.directions) == 64


def test_generic_not_hyperbolic(generic_H):
    rep = hyperbolicity_verdict(generic_H)
    assert not rep.weakly_hyperbolic and rep.root_verdict is False
    assert rep.worst_value == pytest.approx(0.0708, abs=1e-3)


def test_error_bounds():
    w, b = eigenvalue_error_bounds(np.diag([3.0, 1.0]), 1e-10)
    np.testing.assert_allclose(w, [1.0, 3.0])
    np.testing.assert_allclose(b, 1e-10, rtol=1e-12)
    J = np.array([[0.0, 1.0], [0.0, 0.0]])
    _, b = eigenvalue_error_bounds(J, 1e-10)
    np.testing.assert_allclose(b, 1e-5, rtol=1e-6)


def test_report_outputs(tmp_path):
    rep = hyperbolicity_verdict(SYM, samples=[[1.0, 0.0], [0.0, 1.0]])
    rep.save(tmp_path / "r.json")
    rep.write_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_bytes().split(b"\r\n")
    assert lines[0].startswith(b"xi_hat1,xi_hat2,re_a1,im_a1")
    assert len([l for l in lines if l]) == 3
