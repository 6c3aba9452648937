"""Evans function of the linearization about a periodic profile.

With nu = e_1 and a co-moving frame, the Fourier-Laplace eigenvalue
equation is

    lam w + (A^1 w)' + i A^xi w = (B^11 w')' + i (B^{1xi} w)' + i B^{xi1} w' - B^{xixi} w

with A^j w = Df^j(u) w - (DB^{j1}(u) w) u' (A^1 shifted by -s I), and
A^xi = sum_{j>=2} xi_j A^j, B^{1xi} = sum_{k>=2} xi_k B^{1k}, etc.

Internally the equation is integrated in flux variables (w, z) with
z = B^11 w' - A^1 w + i B^{1xi} w, which needs no derivatives of the
coefficients:

    w' = (B^11)^{-1} (z + A^1 w - i B^{1xi} w)
    z' = -i B^{xi1} w' + (i A^xi + B^{xixi} + lam) w.

The change of variables (w, z) -> (w, w') is X-periodic, so the normalized
(w, w') determinant equals

    D = (-1)^n det(B^11(u(0)))^{-1} det(Phi - e^{i X xi_1} I)

where Phi is the flux-variable monodromy.  Two integrators are provided:
a sixth-order commutator-free-in-time Magnus method on a uniform grid (fast
and vectorized over lam) and adaptive DOP853 co-integrating the profile.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ConfigError, ContourError, IntegrationError
from .integrate import ATOL, RTOL, solve_adaptive
from .model import SystemSpec
from .profile import PeriodicProfile, ProfileField
from .util import min_gap, richardson

RESCALE = 1e100
_GAUSS = np.array([0.5 - np.sqrt(15) / 10, 0.5, 0.5 + np.sqrt(15) / 10])


def _require_e1(profile: PeriodicProfile):
    if np.any(profile.params.delta != 0.0):
        raise ConfigError("the Evans function is implemented for nu = e_1 (delta = 0)")


def _local_coefficients(sys: SystemSpec, profile: PeriodicProfile, x=None, u=None, du=None):
    """A^j and B^{jk} along the profile.

    Returns ``(A, B)`` with ``A`` of shape ``(d, P, n, n)`` and ``B`` of shape
    ``(d, d, P, n, n)``; ``P`` is the number of points.
    """
    if u is None:
        u = profile(x)
        du = profile(x, 1)
    u = np.atleast_2d(u)
    du = np.atleast_2d(du)
    P, n = u.shape
    d = sys.d
    uT = u.T
    A = np.empty((d, P, n, n))
    B = np.empty((d, d, P, n, n))
    for j in range(d):
        for k in range(d):
            B[j, k] = np.moveaxis(np.asarray(sys.B(j, k, uT)), -1, 0)
        A[j] = np.moveaxis(np.asarray(sys.df(j, uT)), -1, 0)
        if not sys.laplacian_flag:
            dB = np.moveaxis(np.asarray(sys.dB(j, 0, uT)), -1, 0)
            A[j] = A[j] - np.einsum("pacm,pc->pam", dB, du)
    A[0] = A[0] - profile.params.s * np.eye(n)
    return A, B


def _flux_matrix(A, B, lam, xi_t):
    """Flux-form coefficient matrices, shape ``lam.shape + (P, 2n, 2n)``."""
    lam = np.asarray(lam, dtype=complex)
    xi_t = np.asarray(xi_t, dtype=float).ravel()
    d, P, n, _ = A.shape
    K = np.linalg.inv(B[0, 0])
    Axi = np.zeros((P, n, n), dtype=complex)
    B1x = np.zeros((P, n, n))
    Bx1 = np.zeros((P, n, n))
    Bxx = np.zeros((P, n, n))
    for j in range(1, d):
        xj = xi_t[j - 1]
        if xj == 0.0:
            continue
        Axi += xj * A[j]
        B1x += xj * B[0, j]
        Bx1 += xj * B[j, 0]
        for k in range(1, d):
            Bxx += xj * xi_t[k - 1] * B[j, k]
    TL = K @ (A[0] - 1j * B1x)
    BR = -1j * Bx1 @ K
    BL0 = -1j * Bx1 @ TL + 1j * Axi + Bxx
    C = np.zeros(lam.shape + (P, 2 * n, 2 * n), dtype=complex)
    C[..., :n, :n] = TL
    C[..., :n, n:] = K
    C[..., n:, n:] = BR
    C[..., n:, :n] = BL0
    idx = np.arange(n)
    C[..., n + idx, idx] += lam[..., None, None]
    return C


def _expm_batch(M: np.ndarray, order: int = 18) -> np.ndarray:
    """Matrix exponential of a stack (scaling and squaring, Taylor)."""
    nrm = np.abs(M).sum(axis=-1).max()
    sq = max(0, int(np.ceil(np.log2(nrm / 0.25)))) if nrm > 0 else 0
    Ms = M / 2.0**sq
    eye = np.eye(M.shape[-1])
    E = eye + Ms / order
    for k in range(order - 1, 0, -1):
        E = eye + (Ms @ E) / k
    for _ in range(sq):
        E = E @ E
    return E


def _comm(a, b):
    return a @ b - b @ a


def _tree_product(E: np.ndarray):
    """Ordered product E[N-1] ... E[0] over axis -3, with magnitude control.

    Returns ``(Phi, log_scale)`` where the true product is
    ``Phi * exp(log_scale)`` (scalar factor).
    """
    log_scale = np.zeros(E.shape[:-3])
    while E.shape[-3] > 1:
        N = E.shape[-3]
        if N % 2:
            last = E[..., -1:, :, :]
            E = E[..., :-1, :, :]
        else:
            last = None
        E = E[..., 1::2, :, :] @ E[..., 0::2, :, :]
        if last is not None:
            E = np.concatenate([E, last], axis=-3)
        nrm = np.abs(E).max(axis=(-3, -2, -1))
        big = nrm > RESCALE
        if np.any(big):
            c = np.where(big, nrm, 1.0)
            E = E / c[..., None, None, None]
            log_scale = log_scale + np.log(c)
    return E[..., 0, :, :], log_scale


@dataclass(frozen=True)
class EvansValue:
    """D with true value ``D * exp(log_scale)`` at the point (lam, xi1, xi_t)."""

    D: complex
    log_scale: float
    lam: complex
    xi1: float
    xi_t: tuple

    @property
    def value(self) -> complex:
        return complex(self.D * np.exp(self.log_scale))


class EigenCoefficients:
    """Periodic coefficient matrices of the first-order eigenvalue system.

    ``flux(x)`` returns the flux-variable matrices and ``__call__(x)`` the
    (w, w') form ``(w, w')' = C(x) (w, w')``.  The latter needs x-derivatives
    of B^11, A^1 and B^{1xi}; these come from spectral differentiation of the
    coefficients sampled on the profile grid.
    """

    def __init__(self, sys: SystemSpec, profile: PeriodicProfile, lam, xi_t):
        _require_e1(profile)
        self.sys, self.profile = sys, profile
        self.lam = complex(lam)
        self.xi_t = np.atleast_1d(np.asarray(xi_t, dtype=float))
        if self.xi_t.size != sys.d - 1:
            raise ConfigError(f"xi_t must have {sys.d - 1} components")
        A, B = _local_coefficients(sys, profile, profile.grid)
        self._A, self._B = A, B
        n = sys.n
        B11 = B[0, 0]
        A1 = A[0]
        B1x = sum((self.xi_t[j - 1] * B[0, j] for j in range(1, sys.d)), np.zeros_like(B11))
        self._stack = np.concatenate([B11, A1, B1x], axis=1)  # (m, 3n, n)
        self._coef = np.fft.fft(self._stack, axis=0) / profile.m
        self.n = n

    def flux(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        A, B = _local_coefficients(self.sys, self.profile, x)
        return _flux_matrix(A, B, self.lam, self.xi_t)

    def __call__(self, x):
        from .profile import trig_eval
        x = np.atleast_1d(np.asarray(x, dtype=float))
        n = self.n
        A, B = _local_coefficients(self.sys, self.profile, x)
        F = _flux_matrix(A, B, self.lam, self.xi_t)
        dS = trig_eval(self._coef, self.profile.X, x, 1)
        dB11, dA1, dB1x = dS[:, :n], dS[:, n:2 * n], dS[:, 2 * n:]
        K = np.linalg.inv(B[0, 0])
        B1x = sum((self.xi_t[j - 1] * B[0, j] for j in range(1, self.sys.d)), np.zeros_like(K))
        # z = B11 w' - A1 w + i B1x w  =>  B11 w'' = z' - B11' w' + A1' w + A1 w' - i B1x' w - i B1x w'
        # with z' = F_bl w + F_br (B11 w' ... ) expressed through (w, w').
        Fbl, Fbr = F[:, n:, :n], F[:, n:, n:]
        # z' = Fbl w + Fbr z, z = B11 w' + (-A1 + i B1x) w
        Zw = -A[0] + 1j * B1x
        zp_w = Fbl + Fbr @ Zw
        zp_wp = Fbr @ B[0, 0]
        C = np.zeros((x.size, 2 * n, 2 * n), dtype=complex)
        C[:, :n, n:] = np.eye(n)
        C[:, n:, :n] = K @ (zp_w + dA1 - 1j * dB1x)
        C[:, n:, n:] = K @ (zp_wp - dB11 + A[0] - 1j * B1x)
        return C


def eigen_ode_coefficients(sys: SystemSpec, profile: PeriodicProfile, lam, xi_t) -> EigenCoefficients:
    """Coefficient functions of the first-order 2n eigenvalue system."""
    return EigenCoefficients(sys, profile, lam, xi_t)


def initial_flux_data(sys: SystemSpec, profile: PeriodicProfile, xi_t) -> np.ndarray:
    """Normalized initial block in flux variables (columns w^1..w^{2n}).

    w^j(0) = e_j, w^j'(0) = (B^11)^{-1} A^1 e_j   ->  z = i B^{1xi} e_j;
    w^{n+j}(0) = 0, w^{n+j}'(0) = -(B^11)^{-1} e_j  ->  z = -e_j.
    """
    n = sys.n
    A, B = _local_coefficients(sys, profile, [0.0])
    xi_t = np.atleast_1d(np.asarray(xi_t, dtype=float))
    B1x = sum((xi_t[j - 1] * B[0, j, 0] for j in range(1, sys.d)), np.zeros((n, n)))
    Y0 = np.zeros((2 * n, 2 * n), dtype=complex)
    Y0[:n, :n] = np.eye(n)
    Y0[n:, :n] = 1j * B1x
    Y0[n:, n:] = -np.eye(n)
    return Y0


def flux_to_w(sys: SystemSpec, profile: PeriodicProfile, x, Y, xi_t):
    """Convert flux-variable columns at point ``x`` to (w, w')."""
    n = sys.n
    A, B = _local_coefficients(sys, profile, [x])
    xi_t = np.atleast_1d(np.asarray(xi_t, dtype=float))
    B1x = sum((xi_t[j - 1] * B[0, j, 0] for j in range(1, sys.d)), np.zeros((n, n)))
    w, z = Y[:n], Y[n:]
    wp = np.linalg.solve(B[0, 0, 0], z + (A[0, 0] - 1j * B1x) @ w)
    return np.concatenate([w, wp])


class EvansFunction:
    """Evaluator of D(lam, xi_1, xi_t) for a fixed system and profile.

    Parameters
    ----------
    method : {"magnus", "adaptive"}
        ``"magnus"``: sixth-order Magnus integrator with ``steps`` uniform
        steps, vectorized over lam.  ``"adaptive"``: DOP853 at
        ``rtol``/``atol``, co-integrating the profile ODE from the anchor.
    """

    def __init__(self, sys: SystemSpec, profile: PeriodicProfile, method: str = "magnus",
                 steps: int = 1024, rtol: float = RTOL, atol: float = ATOL):
        _require_e1(profile)
        if method not in ("magnus", "adaptive"):
            raise ConfigError(f"unknown Evans method {method!r}")
        self.sys, self.profile, self.method = sys, profile, method
        self.steps, self.rtol, self.atol = int(steps), rtol, atol
        n = sys.n
        self.n = n
        _, B0 = _local_coefficients(sys, profile, [0.0])
        self._pref = (-1) ** n / np.linalg.det(B0[0, 0, 0])
        if method == "magnus":
            h = profile.X / self.steps
            x = (np.arange(self.steps)[:, None] + _GAUSS[None, :]).ravel() * h
            self._A, self._B = _local_coefficients(sys, profile, x)
            self._h = h

    # -- monodromy -------------------------------------------------------
    def _monodromy_magnus(self, lam, xi_t):
        lam = np.asarray(lam, dtype=complex)
        C = _flux_matrix(self._A, self._B, lam, xi_t)
        N, h = self.steps, self._h
        C = C.reshape(lam.shape + (N, 3) + C.shape[-2:])
        A1, A2, A3 = C[..., 0, :, :], C[..., 1, :, :], C[..., 2, :, :]
        a1 = h * A2
        a2 = (np.sqrt(15) * h / 3) * (A3 - A1)
        a3 = (10 * h / 3) * (A3 - 2 * A2 + A1)
        C1 = _comm(a1, a2)
        C2 = -_comm(a1, 2 * a3 + C1) / 60
        Om = a1 + a3 / 12 + _comm(-20 * a1 - a3 + C1, a2 + C2) / 240
        return _tree_product(_expm_batch(Om))

    def _monodromy_adaptive(self, lam, xi_t):
        sys, prof, n = self.sys, self.profile, self.n
        G = ProfileField(sys, prof.params)
        lam = complex(lam)

        def rhs(t, y):
            u = y[:n].real
            du = G(u)
            A, B = _local_coefficients(sys, prof, u=u[None, :], du=du[None, :])
            C = _flux_matrix(A, B, lam, xi_t)[0]
            Y = y[n:].reshape(2 * n, 2 * n)
            return np.concatenate([du.astype(complex), (C @ Y).ravel()])

        y0 = np.concatenate([prof.samples[0].astype(complex), np.eye(2 * n, dtype=complex).ravel()])
        sol = solve_adaptive(rhs, y0, (0.0, prof.X), rtol=self.rtol, atol=self.atol)
        Phi = sol.y[n:, -1].reshape(2 * n, 2 * n)
        return Phi, 0.0

    def monodromy(self, lam, xi_t):
        """Flux-variable monodromy ``(Phi, log_scale)``; true matrix = Phi exp(log_scale)."""
        xi_t = np.atleast_1d(np.asarray(xi_t, dtype=float))
        if xi_t.size != self.sys.d - 1:
            raise ConfigError(f"xi_t must have {self.sys.d - 1} components")
        if self.method == "magnus":
            return self._monodromy_magnus(lam, xi_t)
        lam_a = np.asarray(lam, dtype=complex)
        if lam_a.ndim == 0:
            return self._monodromy_adaptive(complex(lam_a), xi_t)
        out = [self._monodromy_adaptive(l, xi_t) for l in lam_a.ravel()]
        Phi = np.stack([o[0] for o in out]).reshape(lam_a.shape + out[0][0].shape)
        return Phi, np.zeros(lam_a.shape)

    def evaluate(self, lam, xi1: float = 0.0, xi_t=None):
        """Return ``(D, log_scale)`` arrays (vectorized over ``lam``)."""
        xi_t = np.zeros(self.sys.d - 1) if xi_t is None else np.atleast_1d(np.asarray(xi_t, float))
        Phi, ls = self.monodromy(lam, xi_t)
        n2 = 2 * self.n
        e = np.exp(1j * self.profile.X * xi1)
        # det(Phi c - e I) = c^{2n} det(Phi - e/c I)
        c = np.exp(np.asarray(ls))
        M = Phi - (e / c)[..., None, None] * np.eye(n2)
        D = self._pref * np.linalg.det(M)
        log_scale = n2 * np.asarray(ls, dtype=float)
        if not np.all(np.isfinite(D)):
            raise IntegrationError("Evans determinant is not finite")
        return D, log_scale

    def __call__(self, lam, xi1: float = 0.0, xi_t=None):
        """True value D(lam, xi1, xi_t) (vectorized over ``lam``)."""
        D, ls = self.evaluate(lam, xi1, xi_t)
        return D * np.exp(ls) if np.any(ls) else D

    def at(self, xi, lam):
        """D as a function of the full wave vector ``xi`` (length d)."""
        xi = np.asarray(xi, dtype=float)
        return self(lam, xi[0], xi[1:])

    def value(self, lam, xi1: float = 0.0, xi_t=None) -> EvansValue:
        D, ls = self.evaluate(complex(lam), xi1, xi_t)
        xi_t = () if xi_t is None else tuple(np.atleast_1d(xi_t).tolist())
        return EvansValue(complex(D), float(ls), complex(lam), float(xi1), xi_t)

    # -- column-wise assembly --------------------------------------------
    def basis_columns(self, lam, xi_t):
        """Normalized basis in (w, w') at x = 0 and x = X, each ``(2n, 2n)``."""
        Y0 = initial_flux_data(self.sys, self.profile, xi_t)
        Phi, ls = self.monodromy(complex(lam), xi_t)
        YX = (Phi * np.exp(ls)) @ Y0
        W0 = flux_to_w(self.sys, self.profile, 0.0, Y0, xi_t)
        WX = flux_to_w(self.sys, self.profile, self.profile.X, YX, xi_t)
        return W0, WX

    def columnwise(self, lam, xi1: float = 0.0, xi_t=None) -> complex:
        """D from det[W(X) - e^{i X xi1} W(0)] assembled column by column."""
        xi_t = np.zeros(self.sys.d - 1) if xi_t is None else np.atleast_1d(np.asarray(xi_t, float))
        W0, WX = self.basis_columns(lam, xi_t)
        return complex(np.linalg.det(WX - np.exp(1j * self.profile.X * xi1) * W0))


def evans_eval(sys: SystemSpec, profile: PeriodicProfile, lam, xi1: float = 0.0, xi_t=None,
               method: str = "magnus", **kw) -> EvansValue:
    return EvansFunction(sys, profile, method=method, **kw).value(lam, xi1, xi_t)


def evans_basis(sys: SystemSpec, profile: PeriodicProfile, lam, xi_t, rtol: float = RTOL,
                atol: float = ATOL):
    """Normalized basis (w, w') sampled on the profile grid plus the endpoint.

    Returns ``(x, W)`` with ``W`` of shape ``(m + 1, 2n, 2n)``.
    """
    _require_e1(profile)
    n = sys.n
    G = ProfileField(sys, profile.params)
    xi_t = np.atleast_1d(np.asarray(xi_t, dtype=float))
    Y0 = initial_flux_data(sys, profile, xi_t)
    lam = complex(lam)

    def rhs(t, y):
        u = y[:n].real
        du = G(u)
        A, B = _local_coefficients(sys, profile, u=u[None, :], du=du[None, :])
        C = _flux_matrix(A, B, lam, xi_t)[0]
        return np.concatenate([du.astype(complex), (C @ y[n:].reshape(2 * n, 2 * n)).ravel()])

    x = np.append(profile.grid, profile.X)
    y0 = np.concatenate([profile.samples[0].astype(complex), Y0.ravel()])
    sol = solve_adaptive(rhs, y0, (0.0, profile.X), rtol=rtol, atol=atol, t_eval=x)
    W = np.empty((x.size, 2 * n, 2 * n), dtype=complex)
    for i, xi in enumerate(x):
        W[i] = flux_to_w(sys, profile, xi, sol.y[n:, i].reshape(2 * n, 2 * n), xi_t)
    return x, W


def write_grid_csv(path, rows, d: int):
    """CSV columns (Re lam, Im lam, xi_1.., Re D, Im D, log_scale), 17 digits."""
    head = ["re_lambda", "im_lambda"] + [f"xi{j + 1}" for j in range(d)] + ["re_D", "im_D", "log_scale"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(head)
        for lam, xi, D, ls in rows:
            w.writerow([f"{v:.17g}" for v in (lam.real, lam.imag, *xi, D.real, D.imag, ls)])


# contours and roots ------------------------------------------------------

def circle(center: complex, radius: float):
    """Parametrized circle t in [0, 1) -> center + radius e^{2 pi i t}."""
    return lambda t: center + radius * np.exp(2j * np.pi * np.asarray(t))


def winding_number(f, contour, n0: int = 64, max_points: int = 1 << 14, floor: float = 0.0) -> int:
    """Winding number of ``f`` (vectorized in lam) along a closed contour.

    Segments are bisected until the phase change between neighbors is below
    pi/2.  Raises :class:`ContourError` when refinement fails or |f| falls
    below ``floor`` on the contour.
    """
    t = np.linspace(0.0, 1.0, n0 + 1)
    vals = np.asarray(f(contour(t[:-1])))
    vals = np.append(vals, vals[0])
    while True:
        if np.any(np.abs(vals) <= floor) or np.any(vals == 0):
            raise ContourError("Evans function vanishes (below floor) on the contour")
        dphi = np.angle(vals[1:] / vals[:-1])
        bad = np.abs(dphi) >= np.pi / 2
        if not np.any(bad):
            return int(np.rint(dphi.sum() / (2 * np.pi)))
        if t.size + bad.sum() > max_points:
            raise ContourError("contour refinement limit reached (root on or near the contour)")
        tm = 0.5 * (t[:-1][bad] + t[1:][bad])
        vm = np.asarray(f(contour(tm)))
        t = np.concatenate([t, tm])
        vals = np.concatenate([vals, vm])
        order = np.argsort(t, kind="stable")
        t, vals = t[order], vals[order]


def count_roots(ev: EvansFunction, xi, contour=None, center: complex = 0.0, radius: float = 1e-2,
                floor: float = 0.0, **kw) -> int:
    """Number of roots (with multiplicity) of lam -> D(lam, xi) inside the contour."""
    xi = np.asarray(xi, dtype=float)
    contour = circle(center, radius) if contour is None else contour
    return winding_number(lambda lam: ev(lam, xi[0], xi[1:]), contour, floor=floor, **kw)


def _newton_polish(f, z, scale: float, iters: int = 8):
    h = 1e-7 * scale
    for _ in range(iters):
        fz = f(z)
        df = (f(z + h) - f(z - h)) / (2 * h)
        if df == 0:
            break
        step = fz / df
        z = z - step
        if abs(step) < 1e-14 * scale:
            break
    return z


def roots_in_disk(f, center: complex, radius: float, N: int = 256, polish: bool = True):
    """Delves-Lyness: all roots of analytic ``f`` inside a circle.

    ``f`` is vectorized.  Moments of the logarithmic derivative come from a
    spectral derivative of log f on the circle; the roots of the resulting
    polynomial are then polished by Newton with centered differences.
    """
    phi = 2 * np.pi * np.arange(N) / N
    vals = np.asarray(f(center + radius * np.exp(1j * phi)))
    if np.any(vals == 0):
        raise ContourError("function vanishes on the circle")
    ang = np.unwrap(np.angle(vals))
    K = int(np.rint((ang[-1] + (np.angle(vals[0] / vals[-1])) - ang[0]) / (2 * np.pi)))
    if K == 0:
        return np.array([], dtype=complex)
    L = np.log(np.abs(vals)) + 1j * (ang - K * phi)
    k = np.fft.fftfreq(N, d=1.0 / N)
    dL = np.fft.ifft(np.fft.fft(L) * 1j * k) + 1j * K
    zeta = np.exp(1j * phi)
    s = np.array([np.mean(zeta**p * dL) / 1j for p in range(K + 1)])
    # Newton identities -> monic polynomial in zeta = (lam - center) / radius
    e = np.zeros(K + 1, dtype=complex)
    e[0] = 1.0
    for k_ in range(1, K + 1):
        e[k_] = sum((-1) ** (i - 1) * e[k_ - i] * s[i] for i in range(1, k_ + 1)) / k_
    coeffs = [(-1) ** k_ * e[k_] for k_ in range(K + 1)]
    z = center + radius * np.roots(coeffs)
    if polish:
        f1 = lambda x: complex(np.asarray(f(np.array([x])))[0])
        z = np.array([_newton_polish(f1, zz, radius) for zz in z])
    return np.sort_complex(z)


def find_roots(ev: EvansFunction, xi, center: complex = 0.0, radius: float = 1e-2, N: int = 256):
    xi = np.asarray(xi, dtype=float)
    return roots_in_disk(lambda lam: ev(lam, xi[0], xi[1:]), center, radius, N)


@dataclass
class RootBranches:
    rho: np.ndarray
    branches: np.ndarray  # (len(rho), count) in lam-hat units
    counts: list
    limits: np.ndarray
    matched: bool
    message: str = ""


def match_branches(prev: np.ndarray, new: np.ndarray) -> np.ndarray:
    """Reorder ``new`` to follow ``prev`` by optimal assignment."""
    cost = np.abs(prev[:, None] - new[None, :])
    r, c = linear_sum_assignment(cost)
    out = np.empty_like(prev)
    out[r] = new[c]
    return out


def track_roots(ev: EvansFunction, xi_hat, rho_grid, radius: float, expected: int | None = None,
                N: int = 64, collision_tol: float = 1e-6, levels: int | None = None) -> RootBranches:
    """Roots of lam_hat -> rho^{-(n+1)} D(rho xi_hat, rho lam_hat) for decreasing rho.

    The roots inside the lam_hat disk of the given radius are counted and
    located at every level, matched across levels by optimal assignment,
    and extrapolated to rho = 0.  For a halving grid the limit is the
    Richardson extrapolation over the last ``levels + 1`` levels (all levels
    by default; the roots are analytic in rho at simple characteristic
    values); otherwise it is linear in the last two levels.
    """
    n = ev.n
    expected = n + 1 if expected is None else expected
    xi_hat = np.asarray(xi_hat, dtype=float)
    rho_grid = np.asarray(rho_grid, dtype=float)
    rows, counts = [], []
    matched, msg = True, ""
    for rho in rho_grid:
        xi = rho * xi_hat
        f = lambda lh, rho=rho, xi=xi: ev(rho * np.asarray(lh), xi[0], xi[1:]) / rho ** (n + 1)
        z = roots_in_disk(f, 0.0, radius, N)
        counts.append(z.size)
        if z.size != expected:
            matched = False
            msg = f"root count {z.size} != {expected} at rho={rho:g}"
            z = np.resize(z, expected) if z.size else np.full(expected, np.nan + 0j)
        if rows:
            z = match_branches(rows[-1], z)
        if z.size > 1:
            gap = min_gap(z)
            if gap < collision_tol:
                matched = False
                msg = f"branch collision at rho={rho:g} (gap {gap:.2e})"
        rows.append(z)
    br = np.array(rows)
    halving = rho_grid.size >= 2 and np.allclose(rho_grid[:-1] / rho_grid[1:], 2.0)
    if halving:
        lim = np.array([richardson(br[:, j], levels=levels)[0] for j in range(br.shape[1])])
    elif len(rho_grid) >= 2:
        r1, r0 = rho_grid[-2], rho_grid[-1]
        lim = br[-1] - r0 * (br[-2] - br[-1]) / (r1 - r0)
    else:
        lim = br[-1]
    return RootBranches(rho_grid, br, counts, lim, matched, msg)
