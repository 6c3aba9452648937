"""Periodic traveling-wave profiles.

The profile ODE along a unit direction nu is

    B_nu(u) u' = sum_j nu_j f^j(u) - s u - q,    B_nu = sum_{jk} nu_j nu_k B^{jk}.

A periodic profile is a closed orbit u(X; a, s, nu, q) = a.  Shooting uses
the fixed-step RK8 integrator on the uniform grid y_i = i X / m together
with the first variational equations, so the Newton Jacobian is exact up to
integration error and smooth in every parameter, including X.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import (AmplitudeFloorError, ConfigError, ConvergenceError, HypothesisError,
                     IntegrationError)
from .integrate import ATOL, RTOL, rk8_fixed, solve_adaptive
from .model import SystemSpec, viscosity_along
from .util import write_json

SCHEMA_VERSION = 1
DEFAULT_SAMPLES = 256
AMPLITUDE_FLOOR = 1e-6


def nu_from_delta(delta) -> np.ndarray:
    e = np.concatenate([[1.0], np.atleast_1d(np.asarray(delta, dtype=float))])
    return e / np.linalg.norm(e)


def dnu_ddelta(delta) -> np.ndarray:
    """Jacobian of the direction chart, shape ``(d, d-1)``."""
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    e = np.concatenate([[1.0], delta])
    r = np.linalg.norm(e)
    J = np.zeros((e.size, delta.size))
    for i in range(delta.size):
        J[i + 1, i] = 1.0 / r
        J[:, i] -= e * delta[i] / r**3
    return J


@dataclass(frozen=True)
class ProfileParams:
    """Anchor ``a``, speed ``s``, direction chart ``delta`` and constant ``q``.

    ``nu`` is derived from ``delta``; pass ``nu`` instead of ``delta`` to
    convert (requires ``nu[0] > 0``).
    """

    a: np.ndarray
    s: float
    q: np.ndarray
    delta: np.ndarray
    nu: np.ndarray = field(init=False)

    def __post_init__(self):
        a = np.array(self.a, dtype=float).ravel()
        q = np.array(self.q, dtype=float).ravel()
        if a.shape != q.shape:
            raise ConfigError("anchor a and constant q must both have length n")
        delta = np.array(self.delta, dtype=float).ravel()
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "nu", nu_from_delta(delta))

    @classmethod
    def make(cls, a, s=0.0, q=None, delta=None, nu=None, d: int = 2) -> "ProfileParams":
        a = np.asarray(a, dtype=float)
        q = np.zeros_like(a) if q is None else q
        if nu is not None:
            nu = np.asarray(nu, dtype=float)
            if nu[0] <= 0:
                raise ConfigError("direction chart needs nu[0] > 0")
            delta = nu[1:] / nu[0]
        elif delta is None:
            delta = np.zeros(d - 1)
        return cls(a=a, s=s, q=q, delta=delta)

    @property
    def n(self) -> int:
        return self.a.size

    @property
    def d(self) -> int:
        return self.delta.size + 1

    def with_(self, **kw) -> "ProfileParams":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {"a": self.a.tolist(), "s": self.s, "q": self.q.tolist(),
                "delta": self.delta.tolist(), "nu": self.nu.tolist()}


# right-hand sides ---------------------------------------------------------

class ProfileField:
    """Right-hand side g(u) of the profile ODE and its parameter derivatives."""

    def __init__(self, sys: SystemSpec, params: ProfileParams):
        if params.n != sys.n or params.d != sys.d:
            raise ConfigError("profile parameters do not match the system dimensions")
        self.sys = sys
        self.p = params
        self.nu = params.nu
        self.lap = sys.laplacian_flag
        self.active = [j for j in range(sys.d) if self.nu[j] != 0.0]
        self.dnu = dnu_ddelta(params.delta)
        self.eye = np.eye(sys.n)

    def _Bnu(self, u):
        return viscosity_along(self.sys, self.nu, u)

    def _solve(self, Bnu, rhs):
        # Bnu (n, n, ...), rhs (n, ...) or (n, k, ...)
        if self.lap:
            return rhs
        Bm = np.moveaxis(Bnu, (0, 1), (-2, -1))
        if rhs.ndim == Bnu.ndim - 1:
            r = np.moveaxis(rhs, 0, -1)[..., None]
            return np.moveaxis(np.linalg.solve(Bm, r)[..., 0], -1, 0)
        r = np.moveaxis(rhs, (0, 1), (-2, -1))
        return np.moveaxis(np.linalg.solve(Bm, r), (-2, -1), (0, 1))

    def flux_along(self, u):
        return sum(self.nu[j] * self.sys.f(j, u) for j in self.active)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        rhs = self.flux_along(u) - self.p.s * u - self.p.q.reshape((-1,) + (1,) * (u.ndim - 1))
        if self.lap:
            return rhs
        return self._solve(self._Bnu(u), rhs)

    def jacobian(self, u, g=None):
        """d g / d u, shape ``(n, n)`` for a single state."""
        sys, nu = self.sys, self.nu
        u = np.asarray(u, dtype=float)
        g = self(u) if g is None else g
        J = sum(nu[j] * np.asarray(sys.df(j, u)) for j in self.active)
        J = J - self.p.s * self.eye
        if self.lap:
            return J
        dB = sum(nu[j] * nu[k] * np.asarray(sys.dB(j, k, u))
                 for j in range(sys.d) for k in range(sys.d) if nu[j] * nu[k] != 0.0)
        J = J - np.einsum("abm,b->am", dB, g)
        return np.linalg.solve(self._Bnu(u), J)

    def param_derivatives(self, u, g=None):
        """Columns d g / d (s, delta_2..delta_d, q_1..q_n), shape ``(n, d + n)``."""
        sys, nu = self.sys, self.nu
        n, d = sys.n, sys.d
        u = np.asarray(u, dtype=float)
        g = self(u) if g is None else g
        out = np.empty((n, d + n))
        if self.lap:
            out[:, 0] = -u
            # Laplacian: d g / d nu_j = f^j - 2 nu_j g
            gnu = np.column_stack([sys.f(j, u) - 2 * nu[j] * g for j in range(d)])
            out[:, 1:d] = gnu @ self.dnu
            out[:, d:] = -self.eye
            return out
        Bi = np.linalg.inv(self._Bnu(u))
        out[:, 0] = -Bi @ u
        gnu = np.empty((n, d))
        for j in range(d):
            r = np.asarray(sys.f(j, u), dtype=float).copy()
            for k in self.active:
                r -= nu[k] * (np.asarray(sys.B(j, k, u)) + np.asarray(sys.B(k, j, u))) @ g
            gnu[:, j] = Bi @ r
        out[:, 1:d] = gnu @ self.dnu
        out[:, d:] = -Bi
        return out


def shoot(sys: SystemSpec, params: ProfileParams, X: float, m: int = DEFAULT_SAMPLES,
          variational: bool = False):
    """Integrate from ``params.a`` over ``[0, X]`` with ``m`` RK8 steps.

    Returns ``(traj, Phi, Sp)``: ``traj`` has shape ``(m + 1, n)``.  With
    ``variational``, ``Phi = du(X)/da`` and ``Sp = du(X)/d(s, delta, q)``,
    otherwise both are ``None``.
    """
    G = ProfileField(sys, params)
    n = sys.n
    if not variational:
        traj = rk8_fixed(lambda t, u: G(u), params.a, 0.0, X / m, m)
        return traj, None, None
    npar = sys.d + n

    def rhs(t, Y):
        u = Y[:, 0]
        g = G(u)
        J = G.jacobian(u, g)
        gp = G.param_derivatives(u, g)
        out = np.empty_like(Y)
        out[:, 0] = g
        out[:, 1:1 + n] = J @ Y[:, 1:1 + n]
        out[:, 1 + n:] = J @ Y[:, 1 + n:] + gp
        return out

    Y0 = np.zeros((n, 1 + n + npar))
    Y0[:, 0] = params.a
    Y0[:, 1:1 + n] = np.eye(n)
    Ys = rk8_fixed(rhs, Y0, 0.0, X / m, m)
    return Ys[:, :, 0], Ys[-1][:, 1:1 + n], Ys[-1][:, 1 + n:]


def integrate_profile(sys: SystemSpec, params: ProfileParams, y_end: float, u0=None,
                      rtol: float = RTOL, atol: float = ATOL):
    """Adaptive DOP853 solution of the profile ODE with dense output.

    ``u0`` defaults to ``params.a``.  Raises :class:`IntegrationError` when
    the viscosity matrix is singular along the path or the step size
    underflows.
    """
    G = ProfileField(sys, params)
    u0 = params.a if u0 is None else np.asarray(u0, dtype=float)

    def f(t, u):
        try:
            return G(u)
        except np.linalg.LinAlgError as exc:
            raise IntegrationError(f"singular viscosity matrix at y={t!r}, u={u.tolist()}") from exc

    return solve_adaptive(f, u0, (0.0, y_end), rtol=rtol, atol=atol, dense_output=True)


# trigonometric interpolation ---------------------------------------------

def _wavenumbers(m: int) -> np.ndarray:
    return np.fft.fftfreq(m, d=1.0 / m)


def trig_eval(coefs: np.ndarray, X: float, y, deriv: int = 0) -> np.ndarray:
    """Evaluate a real trigonometric interpolant from FFT coefficients.

    ``coefs`` = ``fft(samples, axis=0) / m`` with shape ``(m, ...)``.  The
    Nyquist mode (even ``m``) is treated as a cosine.  Returns shape
    ``(len(y), ...)``.
    """
    m = coefs.shape[0]
    k = _wavenumbers(m)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    w = 2j * np.pi * k / X
    fac = w**deriv if deriv else np.ones(m)
    if m % 2 == 0:
        nyq = m // 2
        fac = fac.copy()
        # cos(pi m y / X) = Re exp(...): the -m/2 coefficient carries it all
        fac[nyq] = (np.pi * m / X) ** deriv * (1.0 if deriv % 2 == 0 else 0.0) * (-1) ** (deriv // 2)
    E = np.exp(np.outer(y, w))
    if m % 2 == 0:
        E[:, nyq] = np.cos(np.pi * m * y / X)
    out = E @ (coefs.reshape(m, -1) * fac[:, None])
    return out.real.reshape((y.size,) + coefs.shape[1:])


def spectral_derivative(samples: np.ndarray, X: float, order: int = 1) -> np.ndarray:
    """Spectral derivative of periodic samples on the uniform grid (axis 0)."""
    m = samples.shape[0]
    k = _wavenumbers(m)
    w = (2j * np.pi * k / X) ** order
    if m % 2 == 0 and order % 2 == 1:
        w[m // 2] = 0.0
    c = np.fft.fft(samples, axis=0)
    return np.fft.ifft(c * w.reshape((-1,) + (1,) * (samples.ndim - 1)), axis=0).real


@dataclass(frozen=True)
class PeriodicProfile:
    """Closed orbit of the profile ODE.

    ``samples[i]`` is u(i X / m) for ``i = 0..m-1``.
    """

    params: ProfileParams
    X: float
    samples: np.ndarray
    closure_residual: float
    constant: bool = False
    tolerances: dict = field(default_factory=dict, compare=False)
    system_hash: str = ""

    @property
    def m(self) -> int:
        return self.samples.shape[0]

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    @property
    def omega(self) -> float:
        return 1.0 / self.X

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.m) * self.X / self.m

    @property
    def amplitude(self) -> float:
        return float(np.max(self.samples.max(axis=0) - self.samples.min(axis=0)))

    def _coefs(self):
        c = self.__dict__.get("_fft")
        if c is None:
            c = np.fft.fft(self.samples, axis=0) / self.m
            object.__setattr__(self, "_fft", c)
        return c

    def __call__(self, y, deriv: int = 0) -> np.ndarray:
        """Trigonometric interpolant at ``y`` (any real values), shape ``(len(y), n)``."""
        return trig_eval(self._coefs(), self.X, y, deriv)

    def derivative_samples(self, order: int = 1) -> np.ndarray:
        return spectral_derivative(self.samples, self.X, order)

    def ode_residual(self, sys: SystemSpec) -> float:
        G = ProfileField(sys, self.params)
        g = G(self.samples.T).T
        return float(np.abs(self.derivative_samples(1) - g).max())

    def validate(self, sys: SystemSpec, floor: float = AMPLITUDE_FLOOR, ode_tol: float = 1e-8):
        """Raise if any profile invariant fails."""
        if self.closure_residual > 1e-10 * (1 + np.linalg.norm(self.params.a)):
            raise ConvergenceError(f"closure residual {self.closure_residual:.3e} too large")
        res = self.ode_residual(sys)
        if res > ode_tol:
            raise ConvergenceError(f"profile ODE residual {res:.3e} exceeds {ode_tol:g}")
        if not self.constant and self.amplitude < floor:
            raise AmplitudeFloorError(
                f"amplitude floor violated: orbit variation {self.amplitude:.3e} < {floor:g}")
        return self

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "periodic_profile",
            "params": self.params.to_dict(),
            "X": self.X,
            "m": self.m,
            "samples": self.samples.tolist(),
            "closure_residual": self.closure_residual,
            "constant": self.constant,
            "tolerances": dict(self.tolerances),
            "provenance": {"system_hash": self.system_hash},
        }

    def save(self, path) -> None:
        write_json(path, self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "PeriodicProfile":
        try:
            p = doc["params"]
            params = ProfileParams(a=p["a"], s=p["s"], q=p["q"], delta=p["delta"])
            return cls(params=params, X=float(doc["X"]), samples=np.asarray(doc["samples"], dtype=float),
                       closure_residual=float(doc["closure_residual"]),
                       constant=bool(doc.get("constant", False)),
                       tolerances=dict(doc.get("tolerances", {})),
                       system_hash=doc.get("provenance", {}).get("system_hash", ""))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed profile document: {exc}") from exc

    @classmethod
    def load(cls, path) -> "PeriodicProfile":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read profile file {path}: {exc}") from exc
        return cls.from_dict(doc)


def constant_profile(sys: SystemSpec, state, X: float, m: int = DEFAULT_SAMPLES, s: float = 0.0,
                     delta=None) -> PeriodicProfile:
    """Constant state viewed as an X-periodic profile (amplitude floor waived).

    ``q`` is chosen so that the state is an equilibrium of the profile ODE.
    """
    state = np.asarray(state, dtype=float)
    params = ProfileParams.make(state, s=s, q=np.zeros_like(state), delta=delta, d=sys.d)
    G = ProfileField(sys, params)
    q = G.flux_along(state) - s * state
    params = params.with_(q=q)
    samples = np.tile(state, (m, 1))
    return PeriodicProfile(params, float(X), samples, 0.0, constant=True,
                           system_hash=sys.system_hash())


# Newton shooting ----------------------------------------------------------

_SCALARS = ("X", "s")


def _unknown_layout(unknowns: Sequence[str], n: int, d: int):
    names = []
    for u in unknowns:
        if u in ("a", "X", "s"):
            names.append(u)
        elif u.startswith("q") and u[1:].isdigit() and 1 <= int(u[1:]) <= n:
            names.append(u)
        elif u.startswith("delta") and u[5:].isdigit() and 2 <= int(u[5:]) <= d:
            names.append(u)
        else:
            raise ConfigError(f"unknown Newton unknown {u!r}")
    if len(set(names)) != len(names):
        raise ConfigError("repeated Newton unknown")
    scalars = [u for u in names if u != "a"]
    if "a" in names:
        if len(scalars) != 1:
            raise ConfigError("with 'a' among the unknowns exactly one scalar unknown is needed")
    elif len(scalars) != n:
        raise ConfigError(f"with the anchor fixed, {n} scalar unknowns are needed")
    return "a" in names, scalars


@dataclass
class NewtonResult:
    profile: PeriodicProfile
    iterations: int
    residual: float
    jacobian: np.ndarray


def _apply(params: ProfileParams, X: float, name: str, value: float):
    if name == "X":
        return params, value
    if name == "s":
        return params.with_(s=value), X
    if name.startswith("q"):
        q = params.q.copy()
        q[int(name[1:]) - 1] = value
        return params.with_(q=q), X
    dl = params.delta.copy()
    dl[int(name[5:]) - 2] = value
    return params.with_(delta=dl), X


def _get(params: ProfileParams, X: float, name: str) -> float:
    if name == "X":
        return X
    if name == "s":
        return params.s
    if name.startswith("q"):
        return float(params.q[int(name[1:]) - 1])
    return float(params.delta[int(name[5:]) - 2])


def _column(name: str, gX, Sp, n: int):
    if name == "X":
        return gX
    if name == "s":
        return Sp[:, 0]
    if name.startswith("q"):
        d = Sp.shape[1] - n
        return Sp[:, d + int(name[1:]) - 1]
    return Sp[:, int(name[5:]) - 1]


def find_periodic(sys: SystemSpec, params: ProfileParams, X: float,
                  unknowns: Sequence[str] = ("a", "X"), m: int = DEFAULT_SAMPLES,
                  reference: tuple | None = None, tol: float = 1e-12, maxiter: int = 30,
                  floor: float = AMPLITUDE_FLOOR, validate: bool = True) -> NewtonResult:
    """Newton shooting for a closed orbit u(X; a, s, nu, q) = a.

    ``unknowns`` names the free variables: ``"a"`` (all anchor components,
    plus the phase condition <a - a_ref, u'_ref(0)> = 0) together with one
    scalar, or n scalars from ``"X"``, ``"s"``, ``"q1"``.., ``"delta2"``..
    with the anchor held fixed.  The remaining parameters are held at their
    values in ``params``.  ``reference`` is ``(a_ref, du_ref)``; by default
    the initial anchor and the field direction there are used.

    Raises :class:`ConvergenceError` on non-convergence or a degenerate
    phase condition, and :class:`AmplitudeFloorError` if the orbit is
    (numerically) constant.
    """
    n = sys.n
    has_a, scalars = _unknown_layout(unknowns, n, sys.d)
    if has_a:
        if reference is None:
            a_ref = params.a.copy()
            du_ref = ProfileField(sys, params)(a_ref)
        else:
            a_ref, du_ref = (np.asarray(r, dtype=float) for r in reference)
        nrm = np.linalg.norm(du_ref)
        if nrm < 1e-12 * (1 + np.linalg.norm(a_ref)):
            raise AmplitudeFloorError(
                "amplitude floor: phase condition degenerate, the guess is an equilibrium")
        du_ref = du_ref / nrm

    def unpack(z):
        p, Xc = params, X
        off = 0
        if has_a:
            p = p.with_(a=z[:n])
            off = n
        for i, name in enumerate(scalars):
            p, Xc = _apply(p, Xc, name, z[off + i])
        return p, Xc

    z = np.array((list(params.a) if has_a else []) + [_get(params, X, k) for k in scalars], dtype=float)
    res_norm = np.inf
    last_step = np.inf
    J = None
    for it in range(maxiter + 1):
        p, Xc = unpack(z)
        if not Xc > 0:
            raise ConvergenceError(f"Newton produced a nonpositive period X={Xc!r}")
        traj, Phi, Sp = shoot(sys, p, Xc, m, variational=True)
        H = traj[-1] - p.a
        F = H
        cols = []
        if has_a:
            F = np.concatenate([H, [np.dot(p.a - a_ref, du_ref)]])
            top = Phi - np.eye(n)
            cols.append(np.vstack([top, du_ref[None, :]]))
        gX = ProfileField(sys, p)(traj[-1])
        for name in scalars:
            c = _column(name, gX, Sp, n)
            cols.append((np.concatenate([c, [0.0]]) if has_a else c)[:, None])
        J = np.hstack(cols)
        res_norm = float(np.abs(F).max())
        scale = 1 + np.abs(p.a).max()
        # one extra step after convergence so the iterate is accurate to
        # rounding level, which keeps finite differences over families clean
        if res_norm <= tol * scale and last_step <= 1e-13 * scale:
            break
        if it == maxiter:
            if res_norm <= tol * scale:
                break
            raise ConvergenceError(
                f"Newton did not converge in {maxiter} iterations (residual {res_norm:.3e})")
        try:
            dz = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("singular Newton Jacobian (phase condition degenerate?)") from exc
        if np.linalg.cond(J) > 1e14:
            raise ConvergenceError("Newton Jacobian numerically singular (phase condition degenerate?)")
        z = z + dz
        last_step = float(np.abs(dz).max())
    p, Xc = unpack(z)
    samples = traj[:-1]
    closure = float(np.linalg.norm(traj[-1] - p.a))
    prof = PeriodicProfile(p, float(Xc), samples, closure,
                           tolerances={"newton": tol, "steps": m, "integrator": "rk8-fixed"},
                           system_hash=sys.system_hash())
    if prof.amplitude < floor:
        raise AmplitudeFloorError(
            f"amplitude floor violated: converged to a constant state (variation {prof.amplitude:.3e})")
    if validate:
        prof.validate(sys, floor)
    return NewtonResult(prof, it, res_norm, J)


def find_equilibrium(sys: SystemSpec, params: ProfileParams, guess, tol: float = 1e-13,
                     maxiter: int = 50) -> np.ndarray:
    """Newton for g(u) = 0 of the profile field."""
    G = ProfileField(sys, params)
    u = np.asarray(guess, dtype=float).copy()
    for _ in range(maxiter):
        g = G(u)
        if np.abs(g).max() < tol:
            return u
        u = u - np.linalg.solve(G.jacobian(u, g), g)
    raise ConvergenceError("equilibrium Newton did not converge")


def linear_center(sys: SystemSpec, params: ProfileParams, center):
    """Harmonic data at an equilibrium: ``(X0, direction)``.

    The linearization must have a pair of purely imaginary eigenvalues
    +-i w0; X0 = 2 pi / w0 and ``direction`` is the real part of the
    corresponding eigenvector (normalized).
    """
    G = ProfileField(sys, params)
    J = G.jacobian(np.asarray(center, dtype=float))
    ev, V = np.linalg.eig(J)
    k = int(np.argmax(ev.imag))
    if ev[k].imag <= 0 or abs(ev[k].real) > 1e-8 * abs(ev[k]):
        raise HypothesisError(f"equilibrium is not a linear center (eigenvalues {ev})")
    v = V[:, k]
    v = v / v[np.argmax(np.abs(v))]
    return 2 * np.pi / ev[k].imag, v.real / np.linalg.norm(v.real)


def continue_amplitude(sys: SystemSpec, params: ProfileParams, center, amplitudes,
                       unknowns: Sequence[str] = ("X", "s"), direction=None,
                       m: int = DEFAULT_SAMPLES) -> list[PeriodicProfile]:
    """Amplitude continuation from a linear center.

    The anchor is placed at ``center + A * direction`` for each amplitude
    ``A`` (increasing), with the period predicted from the harmonic limit
    for the first point and warm-started afterwards.
    """
    center = np.asarray(center, dtype=float)
    X0, v = linear_center(sys, params.with_(a=center), center)
    if direction is not None:
        v = np.asarray(direction, dtype=float)
        v = v / np.linalg.norm(v)
    out = []
    p, X = params, X0
    for A in amplitudes:
        p = p.with_(a=center + A * v)
        res = find_periodic(sys, p, X, unknowns=unknowns, m=m)
        out.append(res.profile)
        p, X = res.profile.params, res.profile.X
    return out


def vdw_fixture(amplitude: float = 0.05, d: int = 2, transverse=None,
                m: int = DEFAULT_SAMPLES, steps: int = 1):
    """Default end-to-end fixture: p(v) = v^3 - v around the center (1, 0).

    Returns ``(sys, profile)``.  The anchor is ``(1 + amplitude, 0)`` and the
    unknowns are the period and speed.
    """
    from .model import vdw_psystem
    sys = vdw_psystem("v^3 - v", d=d, transverse=transverse)
    params = ProfileParams.make([1.0 + amplitude, 0.0], s=0.0, d=d)
    amps = np.linspace(amplitude / steps, amplitude, steps)
    prof = continue_amplitude(sys, params, [1.0, 0.0], amps, unknowns=("X", "s"),
                              direction=[1.0, 0.0], m=m)[-1]
    return sys, prof


# f^1 is a van der Pol oscillator with a quadratic asymmetry, f^2 a generic
# transverse flux; the profile equation has an isolated limit cycle, so the
# speed and transverse direction are free parameters of the family.
GENERIC_FLUX = (("u2", "u2 - u1^2*u2 - u1 + 0.2*u1^2"),
                ("u2 + 0.5*u1^2", "0.3*u1*u2 - 0.4*u1"))


def generic_fixture(m: int = DEFAULT_SAMPLES):
    """Non-Hamiltonian fixture (n = d = 2, Laplacian viscosity).

    Returns ``(sys, profile)``; solved for the anchor and the period
    (X = 7.3133).
    """
    from .model import builtin_system
    sys = builtin_system("polynomial", {"flux": [list(f) for f in GENERIC_FLUX]})
    res = find_periodic(sys, ProfileParams.make([2.0, 0.0]), 7.3, unknowns=("a", "X"), m=m)
    return sys, res.profile


# submersion ---------------------------------------------------------------

def return_map(sys: SystemSpec, X: float, a, s: float, delta, q, m: int = DEFAULT_SAMPLES):
    """H(X; a, s, delta, q) = u(X) - a on the fixed-step grid."""
    p = ProfileParams(a=a, s=s, q=q, delta=delta)
    traj, _, _ = shoot(sys, p, X, m)
    return traj[-1] - p.a


def submersion_jacobian(sys: SystemSpec, profile: PeriodicProfile, h: float = 1e-4):
    """Central differences of H over (X; a, s, delta, q), Richardson-refined.

    Returns an ``n x (2n + d + 1)`` matrix with column order
    (X, a_1..a_n, s, delta_2..delta_d, q_1..q_n).
    """
    p = profile.params
    n, d = sys.n, sys.d
    theta0 = np.concatenate([[profile.X], p.a, [p.s], p.delta, p.q])

    def H(th):
        return return_map(sys, th[0], th[1:1 + n], th[1 + n], th[2 + n:1 + n + d], th[1 + n + d:],
                          profile.m)

    def cd(i, step):
        e = np.zeros_like(theta0)
        e[i] = step
        return (H(theta0 + e) - H(theta0 - e)) / (2 * step)

    cols = []
    for i in range(theta0.size):
        step = h * (1 + abs(theta0[i]))
        cols.append((4 * cd(i, step / 2) - cd(i, step)) / 3)
    return np.column_stack(cols)


def check_submersion(sys: SystemSpec, profile: PeriodicProfile, threshold: float = 1e-6,
                     h: float = 1e-4) -> dict:
    """Smallest singular value of dH relative to the largest.

    Returns ``{"min_singular_value", "max_singular_value", "relative",
    "pass", "jacobian"}``.
    """
    J = submersion_jacobian(sys, profile, h)
    if not np.all(np.isfinite(J)):
        raise IntegrationError("finite-difference Jacobian of the return map is not finite")
    sv = np.linalg.svd(J, compute_uv=False)
    rel = float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0
    return {"min_singular_value": float(sv[-1]), "max_singular_value": float(sv[0]),
            "relative": rel, "pass": bool(rel >= threshold), "jacobian": J}
