"""Traveling-wave variations and the leading homogeneous part of D.

Laplacian viscosity, s = 0 and nu = e_1 only.  The profile equation is
u' = f^1(u) - q and its variations solve z' = Df^1(u) z + r with

    d/da_j   : z(0) = e_j, r = 0
    d/dq_j   : z(0) = 0,   r = -e_j
    d/ds     : z(0) = 0,   r = -u
    d/ddelta_j: z(0) = 0,   r = f^j(u)      (j >= 2)

In flux variables (w, z) with z = w' - A^1 w the eigenvalue system reads
z' = (lam + i A^xi + |xi~|^2) w, so the variations above are the
normalized basis at (lam, xi) = 0 and its first derivatives, up to
multiples of the q-columns that do not change the determinant.  The
bracket [g] = g(X) - g(0) and period integrals are carried as extra ODE
states, since the variations themselves are not periodic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, HypothesisError
from .integrate import rk8_fixed
from .model import SystemSpec
from .profile import PeriodicProfile, ProfileField
from .util import write_json

SCHEMA_VERSION = 1


@dataclass
class VariationalBundle:
    """Variations on the profile grid with brackets and period integrals.

    Column blocks of ``Z`` (shape ``(m + 1, n, 2n + d)``): Z_a (n), Z_q (n),
    z_s (1), Z_delta (d - 1).  ``integrals[0]`` holds int_0^X Z and
    ``integrals[j]`` holds int_0^X Df^j(u) Z for j = 1..d.
    """

    X: float
    n: int
    d: int
    grid: np.ndarray
    u: np.ndarray          # (m + 1, n) profile on the grid incl. endpoint
    du0: np.ndarray        # u'(0)
    Z: np.ndarray
    integrals: np.ndarray  # (d + 1, n, 2n + d)
    f0: np.ndarray         # f^j(u(0)), shape (d, n)

    def _block(self, name: str) -> slice:
        n = self.n
        return {"a": slice(0, n), "q": slice(n, 2 * n), "s": slice(2 * n, 2 * n + 1),
                "delta": slice(2 * n + 1, 2 * n + self.d)}[name]

    def bracket(self, name: str) -> np.ndarray:
        sl = self._block(name)
        return self.Z[-1][:, sl] - self.Z[0][:, sl]

    def integral(self, name: str, j: int = 0) -> np.ndarray:
        """int Z (j = 0) or int Df^j Z (j = 1..d) for block ``name``."""
        return self.integrals[j][:, self._block(name)]

    @property
    def Z_a(self):
        return self.Z[:, :, self._block("a")]

    @property
    def Z_q(self):
        return self.Z[:, :, self._block("q")]

    @property
    def z_s(self):
        return self.Z[:, :, 2 * self.n]

    @property
    def Z_delta(self):
        return self.Z[:, :, self._block("delta")]

    def w1_checks(self) -> tuple[float, float]:
        """(|[u']|, |int u'|) with u' = Z_a u'(0); both vanish."""
        return (float(np.abs(self.bracket("a") @ self.du0).max()),
                float(np.abs(self.integral("a") @ self.du0).max()))

    def to_dict(self) -> dict:
        def cplx(a):
            return np.asarray(a, dtype=float).tolist()
        return {"schema_version": SCHEMA_VERSION, "kind": "variational_bundle",
                "X": self.X, "n": self.n, "d": self.d, "du0": cplx(self.du0),
                "brackets": {k: cplx(self.bracket(k)) for k in ("a", "q", "s", "delta")},
                "integrals": {k: [cplx(self.integral(k, j)) for j in range(self.d + 1)]
                              for k in ("a", "q", "s", "delta")}}

    def save(self, path):
        write_json(path, self.to_dict())


def _require_laplacian_e1(sys: SystemSpec, profile: PeriodicProfile, s_tol: float = 1e-10):
    if not sys.laplacian_flag:
        raise ConfigError("variations are implemented for Laplacian viscosity only; "
                          "use the direct fit of the Evans function instead")
    p = profile.params
    if abs(p.s) > s_tol or np.any(p.delta != 0.0):
        raise HypothesisError(f"variations require s = 0 and nu = e_1 (s = {p.s:.3e})")


def solve_variations(sys: SystemSpec, profile: PeriodicProfile, m: int | None = None) -> VariationalBundle:
    """Integrate profile, variations and quadratures on the uniform grid (RK8)."""
    _require_laplacian_e1(sys, profile)
    n, d = sys.n, sys.d
    m = profile.m if m is None else int(m)
    G = ProfileField(sys, profile.params)
    k = 2 * n + d
    sz = n * k

    def rhs(t, y):
        u = y[:n]
        Z = y[n:n + sz].reshape(n, k)
        Df = [np.asarray(sys.df(j, u)) for j in range(d)]
        dZ = Df[0] @ Z
        dZ[:, n:2 * n] -= np.eye(n)
        dZ[:, 2 * n] -= u
        for j in range(1, d):
            dZ[:, 2 * n + j] += np.asarray(sys.f(j, u))
        quads = [Z] + [Df[j] @ Z for j in range(d)]
        return np.concatenate([G(u), dZ.ravel()] + [q.ravel() for q in quads])

    Z0 = np.zeros((n, k))
    Z0[:, :n] = np.eye(n)
    y0 = np.concatenate([profile.samples[0], Z0.ravel(), np.zeros((d + 1) * sz)])
    traj = rk8_fixed(rhs, y0, 0.0, profile.X / m, m)
    u = traj[:, :n]
    Z = traj[:, n:n + sz].reshape(m + 1, n, k)
    integrals = traj[-1, n + sz:].reshape(d + 1, n, k)
    u0 = profile.samples[0]
    f0 = np.stack([np.asarray(sys.f(j, u0), dtype=float) for j in range(d)])
    return VariationalBundle(X=profile.X, n=n, d=d, grid=np.linspace(0.0, profile.X, m + 1),
                             u=u, du0=G(u0), Z=Z, integrals=integrals, f0=f0)


@dataclass
class LeadingPart:
    """Evaluator of the degree-(n + 1) leading part Delta_1(xi, lam).

    Delta_1 = det(N) / u'_k(0), where N is the 2n x 2n matrix whose columns
    are (top: bracket, bottom: first-order flux bracket) of the
    a- and q-variations, with column k = argmax |u'_k(0)| replaced by
    (c; C) built from the s- and delta-variations.
    """

    bundle: VariationalBundle
    column: int

    def matrix(self, xi, lam) -> np.ndarray:
        b = self.bundle
        n, d, X = b.n, b.d, b.X
        xi = np.asarray(xi, dtype=float)
        lam = complex(lam)
        xt = xi[1:]
        N = np.zeros((2 * n, 2 * n), dtype=complex)
        Ia = b.integral("a") * lam + 1j * sum((xt[j - 1] * b.integral("a", j + 1) for j in range(1, d)),
                                             np.zeros((n, n)))
        Iq = b.integral("q") * lam + 1j * sum((xt[j - 1] * b.integral("q", j + 1) for j in range(1, d)),
                                             np.zeros((n, n)))
        N[:n, :n] = b.bracket("a")
        N[:n, n:] = b.bracket("q")
        N[n:, :n] = Ia
        N[n:, n:] = Iq + 1j * X * xi[0] * np.eye(n)
        zs_b = b.bracket("s")[:, 0]
        zd_b = b.bracket("delta")
        zs_i = b.integral("s")[:, 0]
        zd_i = b.integral("delta")
        c = -lam * zs_b + 1j * (zd_b @ xt) - 1j * X * xi[0] * b.du0
        C = -lam ** 2 * zs_i
        for j in range(1, d):
            C = C + 1j * lam * xt[j - 1] * (-b.integral("s", j + 1)[:, 0] + zd_i[:, j - 1])
            for kk in range(1, d):
                C = C - xt[j - 1] * xt[kk - 1] * b.integral("delta", j + 1)[:, kk - 1]
        C = C - 1j * X * xi[0] * lam * b.u[0]
        C = C + X * xi[0] * (xt @ b.f0[1:])
        N[:n, self.column] = c
        N[n:, self.column] = C
        return N

    def __call__(self, xi, lam) -> complex:
        return complex(np.linalg.det(self.matrix(xi, lam)) / self.bundle.du0[self.column])

    def many(self, xi, lam) -> np.ndarray:
        """Vectorized over paired arrays ``xi`` (P, d) and ``lam`` (P,)."""
        return np.array([self(x, l) for x, l in zip(np.atleast_2d(xi), np.atleast_1d(lam))])


def assemble_delta1(bundle: VariationalBundle) -> LeadingPart:
    return LeadingPart(bundle=bundle, column=int(np.argmax(np.abs(bundle.du0))))
