"""Local chart of the (n + d)-parameter family of periodic profiles.

A family point is determined by n + d chart coordinates taken from the
parameter names ``X``, ``s``, ``delta2``.., ``q1``..; the anchor ``a`` (with
a phase condition) and one remaining scalar ``kappa`` are solved for by
Newton.  The default keeps the period dependent (coordinates (s, delta, q));
when that block is singular, as for Hamiltonian profile equations where
the speed is pinned on the whole family, the best-conditioned alternative
is selected automatically.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ConvergenceError, SolverError
from .model import SystemSpec
from .profile import (PeriodicProfile, ProfileField, ProfileParams, _apply, _column, _get,
                      find_periodic, shoot)
from .util import write_json

SCHEMA_VERSION = 1


def parameter_names(n: int, d: int) -> tuple[str, ...]:
    return ("X", "s") + tuple(f"delta{j}" for j in range(2, d + 1)) + tuple(
        f"q{j}" for j in range(1, n + 1))


def _block_conditioning(sys: SystemSpec, profile: PeriodicProfile, du_ref) -> dict:
    """sigma_min / sigma_max of d(H, phase)/d(a, kappa) for each candidate kappa."""
    p = profile.params
    traj, Phi, Sp = shoot(sys, p, profile.X, profile.m, variational=True)
    gX = ProfileField(sys, p)(traj[-1])
    n = sys.n
    top = np.vstack([Phi - np.eye(n), du_ref[None, :]])
    out = {}
    for name in parameter_names(n, sys.d):
        col = np.concatenate([_column(name, gX, Sp, n), [0.0]])
        sv = np.linalg.svd(np.column_stack([top, col]), compute_uv=False)
        out[name] = float(sv[-1] / sv[0])
    return out


@dataclass
class FamilyChart:
    """Chart of the profile family around ``base``.

    Parameters
    ----------
    dependent : str or None
        Scalar solved together with the anchor.  ``None`` selects ``"X"``
        when its block is well conditioned (relative smallest singular value
        at least ``cond_floor``) and otherwise the best-conditioned name.
    """

    sys: SystemSpec
    base: PeriodicProfile
    dependent: str | None = None
    h: float = 1e-5
    tol: float = 1e-12
    cond_floor: float = 1e-6
    coords: tuple = field(init=False)
    conditioning: dict = field(init=False)

    def __post_init__(self):
        n, d = self.sys.n, self.sys.d
        du = self.base.derivative_samples(1)[0]
        self._a_ref = self.base.params.a.copy()
        self._du_ref = du / np.linalg.norm(du)
        self.conditioning = _block_conditioning(self.sys, self.base, self._du_ref)
        names = parameter_names(n, d)
        if self.dependent is None:
            if self.conditioning["X"] >= self.cond_floor:
                self.dependent = "X"
            else:
                self.dependent = max(names, key=lambda k: self.conditioning[k])
        if self.dependent not in names:
            raise ConfigError(f"unknown dependent parameter {self.dependent!r}")
        if self.conditioning[self.dependent] < self.cond_floor:
            raise ConvergenceError(
                f"family chart degenerate: block for {self.dependent!r} has relative "
                f"singular value {self.conditioning[self.dependent]:.2e}")
        self.coords = tuple(k for k in names if k != self.dependent)

    @property
    def theta_base(self) -> np.ndarray:
        return self.theta_of(self.base)

    def theta_of(self, profile: PeriodicProfile) -> np.ndarray:
        return np.array([_get(profile.params, profile.X, k) for k in self.coords])

    def solve(self, theta, warm: PeriodicProfile | None = None) -> PeriodicProfile:
        """Profile at chart coordinates ``theta`` (Newton, warm-started)."""
        theta = np.asarray(theta, dtype=float)
        if theta.size != len(self.coords):
            raise ConfigError(f"theta must have {len(self.coords)} entries")
        warm = self.base if warm is None else warm
        p, X = warm.params, warm.X
        for k, v in zip(self.coords, theta):
            p, X = _apply(p, X, k, float(v))
        try:
            res = find_periodic(self.sys, p, X, unknowns=("a", self.dependent), m=self.base.m,
                                reference=(self._a_ref, self._du_ref), tol=self.tol)
        except SolverError as exc:
            raise ConvergenceError(f"family point solve failed (chart radius exceeded?): {exc}") from exc
        return res.profile


def solve_family_point(chart: FamilyChart, theta) -> PeriodicProfile:
    return chart.solve(theta)


@dataclass(frozen=True)
class AveragedQuantities:
    M: np.ndarray
    F: np.ndarray  # (d, n)
    Omega: float
    S: float
    N: np.ndarray
    Q: np.ndarray

    def identity_residual(self) -> float:
        """|sum_j N_j F^j - (S M + Q)|_inf."""
        return float(np.abs(self.N @ self.F - (self.S * self.M + self.Q)).max())

    def vector(self) -> np.ndarray:
        """(M, Omega N, F^1, .., F^d, S Omega)."""
        return np.concatenate([self.M, self.Omega * self.N, self.F.ravel(), [self.S * self.Omega]])


def averaged_quantities(sys: SystemSpec, profile: PeriodicProfile) -> AveragedQuantities:
    """Period averages by the trapezoid rule on the uniform grid.

    F^j = mean(f^j(u) - sum_k B^{jk}(u) nu_k u') with u' the spectral
    derivative in the profile variable.
    """
    p = profile.params
    u = profile.samples.T
    du = profile.derivative_samples(1).T
    d, n = sys.d, sys.n
    F = np.empty((d, n))
    for j in range(d):
        integrand = np.asarray(sys.f(j, u), dtype=float)
        for k in range(d):
            if p.nu[k] != 0.0:
                integrand = integrand - p.nu[k] * np.einsum("abp,bp->ap", np.asarray(sys.B(j, k, u)), du)
        F[j] = integrand.mean(axis=1)
    return AveragedQuantities(M=u.mean(axis=1), F=F, Omega=1.0 / profile.X, S=p.s,
                              N=p.nu.copy(), Q=p.q.copy())


@dataclass(frozen=True)
class HomogenizedJacobians:
    """P = d(M, Omega N)/d theta and Q_j = d(F^j, S Omega e_j)/d theta."""

    P: np.ndarray
    Q: np.ndarray  # (d, n + d, n + d)
    steps: np.ndarray
    error_P: np.ndarray
    error_Q: np.ndarray
    coords: tuple = ()
    omega: float = 1.0

    @property
    def n(self) -> int:
        return self.P.shape[0] - self.d

    @property
    def d(self) -> int:
        return self.Q.shape[0]

    def max_relative_error(self) -> float:
        scale = max(np.abs(self.P).max(), np.abs(self.Q).max())
        return float(max(self.error_P.max(), self.error_Q.max()) / scale)

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "kind": "homogenized_jacobians",
                "coords": list(self.coords), "omega": self.omega,
                "P": self.P.tolist(), "Q": self.Q.tolist(), "steps": self.steps.tolist(),
                "error_P": self.error_P.tolist(), "error_Q": self.error_Q.tolist()}

    def save(self, path):
        write_json(path, self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "HomogenizedJacobians":
        P = np.asarray(doc["P"], dtype=float)
        Q = np.asarray(doc["Q"], dtype=float)
        return cls(P=P, Q=Q, steps=np.asarray(doc.get("steps", []), dtype=float),
                   error_P=np.asarray(doc.get("error_P", np.zeros_like(P)), dtype=float),
                   error_Q=np.asarray(doc.get("error_Q", np.zeros_like(Q)), dtype=float),
                   coords=tuple(doc.get("coords", ())), omega=float(doc.get("omega", 1.0)))

    @classmethod
    def synthetic(cls, P, Q) -> "HomogenizedJacobians":
        P = np.asarray(P, dtype=float)
        Q = np.asarray(Q, dtype=float)
        return cls(P=P, Q=Q, steps=np.zeros(P.shape[0]), error_P=np.zeros_like(P),
                   error_Q=np.zeros_like(Q))


def _split(vec: np.ndarray, n: int, d: int):
    M = vec[:n]
    ON = vec[n:n + d]
    F = vec[n + d:n + d + d * n].reshape(d, n)
    SO = vec[-1]
    P_rows = np.concatenate([M, ON])
    Q_rows = np.stack([np.concatenate([F[j], SO * np.eye(d)[j]]) for j in range(d)])
    return P_rows, Q_rows


def homogenized_jacobians(chart: FamilyChart, h: float | None = None, threads: int = 1,
                          max_error: float = 1e-5) -> HomogenizedJacobians:
    """Central differences in every chart direction, one Richardson step.

    Each derivative uses steps ``h (1 + |theta_i|)`` and half of it;
    R = (4 D_{h/2} - D_h) / 3, with |R - D_{h/2}| as the error estimate.
    Raises :class:`ConvergenceError` if the relative estimate exceeds
    ``max_error``.
    """
    sys = chart.sys
    n, d = sys.n, sys.d
    h = chart.h if h is None else h
    th0 = chart.theta_base
    k = th0.size
    steps = h * (1 + np.abs(th0))
    jobs = []
    for i in range(k):
        for frac in (1.0, 0.5):
            for sign in (1, -1):
                th = th0.copy()
                th[i] += sign * frac * steps[i]
                jobs.append(th)

    def run(th):
        return averaged_quantities(sys, chart.solve(th)).vector()

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            vals = list(pool.map(run, jobs))
    else:
        vals = [run(th) for th in jobs]
    P = np.empty((n + d, k))
    Q = np.empty((d, n + d, k))
    eP = np.empty_like(P)
    eQ = np.empty_like(Q)
    for i in range(k):
        vp, vm, vp2, vm2 = vals[4 * i:4 * i + 4]
        D1 = (vp - vm) / (2 * steps[i])
        D2 = (vp2 - vm2) / steps[i]
        R = (4 * D2 - D1) / 3
        err = np.abs(R - D2)
        P[:, i], Q[:, :, i] = _split(R, n, d)
        eP[:, i], eQ[:, :, i] = _split(err, n, d)
        # the constant parts of the split (unit vectors) carry no error
        eQ[:, n:, i] = np.abs(eQ[:, n:, i])
    H = HomogenizedJacobians(P=P, Q=Q, steps=steps, error_P=eP, error_Q=eQ,
                             coords=chart.coords, omega=1.0 / chart.base.X)
    if H.max_relative_error() > max_error:
        raise ConvergenceError(
            f"Richardson error estimate {H.max_relative_error():.2e} exceeds {max_error:g}")
    return H
