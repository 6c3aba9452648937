"""Conservation-law systems  u_t + sum_j f^j(u)_{x_j} = sum_{jk} (B^{jk}(u) u_{x_k})_{x_j}.

Evaluator conventions (``batch`` axes trail, so every evaluator accepts a
single state of shape ``(n,)`` or a stack of shape ``(n, ...)``):

* ``flux[j](u)``                  -> ``(n, ...)``
* ``flux_jacobian[j](u)``         -> ``(n, n, ...)`` with ``J[a, b] = d f_a / d u_b``
* ``viscosity[j][k](u)``          -> ``(n, n, ...)``
* ``viscosity_derivative[j][k](u)`` -> ``(n, n, n, ...)`` with ``DB[a, b, m] = d B_ab / d u_m``

Spatial indices are zero-based in code: ``flux[0]`` is f^1.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import ConfigError, HypothesisError
from .polynomial import FluxExpression, Polynomial, parse_polynomial

Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SystemSpec:
    n: int
    d: int
    flux: tuple[Evaluator, ...]
    flux_jacobian: tuple[Evaluator, ...]
    viscosity: tuple[tuple[Evaluator, ...], ...]
    viscosity_derivative: tuple[tuple[Evaluator, ...], ...]
    laplacian_flag: bool
    name: str = "custom"
    description: dict = field(default_factory=dict, compare=False)
    box: tuple[tuple[float, float], ...] | None = None
    # exact second derivatives, when the fluxes are polynomial
    flux_hessian: tuple[Evaluator, ...] | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("state dimension n must be positive")
        if self.d < 1:
            raise ConfigError("space dimension d must be positive")
        if len(self.flux) != self.d or len(self.flux_jacobian) != self.d:
            raise ConfigError("need one flux and one flux Jacobian per space dimension")
        if len(self.viscosity) != self.d or any(len(r) != self.d for r in self.viscosity):
            raise ConfigError("viscosity must be a d x d table of evaluators")

    @property
    def working_box(self) -> np.ndarray:
        if self.box is None:
            return np.array([[-1.0, 1.0]] * self.n)
        return np.asarray(self.box, dtype=float)

    def system_hash(self) -> str:
        blob = json.dumps({"name": self.name, "n": self.n, "d": self.d, **self.description},
                          sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()

    # batched helpers --------------------------------------------------
    def f(self, j: int, u):
        return self.flux[j](u)

    def df(self, j: int, u):
        return self.flux_jacobian[j](u)

    def B(self, j: int, k: int, u):
        return self.viscosity[j][k](u)

    def dB(self, j: int, k: int, u):
        return self.viscosity_derivative[j][k](u)


def _const(mat: np.ndarray, extra_axes: int = 0) -> Evaluator:
    mat = np.array(mat, dtype=float)

    mat.setflags(write=False)

    def ev(u):
        u = np.asarray(u)
        if u.ndim == 1:
            return mat
        shape = mat.shape + u.shape[1:]
        return np.broadcast_to(mat.reshape(mat.shape + (1,) * (u.ndim - 1)), shape)

    return ev


def _linear(A: np.ndarray) -> Evaluator:
    A = np.array(A, dtype=float)

    def ev(u):
        return np.tensordot(A, np.asarray(u), axes=(1, 0))

    return ev


def _laplacian_tables(n: int, d: int):
    eye = np.eye(n)
    zero = np.zeros((n, n))
    visc = tuple(tuple(_const(eye if j == k else zero) for k in range(d)) for j in range(d))
    dvisc = tuple(tuple(_const(np.zeros((n, n, n))) for _ in range(d)) for _ in range(d))
    return visc, dvisc


def polynomial_system(fluxes: Sequence[FluxExpression], *, name: str = "polynomial",
                      description: dict | None = None, box=None,
                      viscosity: str | np.ndarray = "laplacian") -> SystemSpec:
    """System with polynomial fluxes and constant (default Laplacian) viscosity."""
    d = len(fluxes)
    n = fluxes[0].nvars
    if any(len(F.components) != n or F.nvars != n for F in fluxes):
        raise ConfigError("each flux must have n components in n variables")
    if isinstance(viscosity, str):
        if viscosity != "laplacian":
            raise ConfigError(f"unknown viscosity {viscosity!r}")
        visc, dvisc = _laplacian_tables(n, d)
        lap = True
    else:
        Bt = np.asarray(viscosity, dtype=float)
        if Bt.shape != (d, d, n, n):
            raise ConfigError(f"viscosity must have shape {(d, d, n, n)}")
        visc = tuple(tuple(_const(Bt[j, k]) for k in range(d)) for j in range(d))
        dvisc = tuple(tuple(_const(np.zeros((n, n, n))) for _ in range(d)) for _ in range(d))
        lap = _is_laplacian(Bt)
    return SystemSpec(
        n=n, d=d,
        flux=tuple(F.__call__ for F in fluxes),
        flux_jacobian=tuple(F.jacobian for F in fluxes),
        viscosity=visc, viscosity_derivative=dvisc, laplacian_flag=lap,
        name=name, description=description or {"flux": [F.to_strings() for F in fluxes]},
        box=None if box is None else tuple(map(tuple, box)),
        flux_hessian=tuple(F.hessian for F in fluxes),
    )


def _is_laplacian(Bt: np.ndarray) -> bool:
    d, _, n, _ = Bt.shape
    ref = np.einsum("jk,ab->jkab", np.eye(d), np.eye(n))
    return bool(np.array_equal(Bt, ref))


def constant_coefficient_system(A: Sequence, B=None, *, box=None) -> SystemSpec:
    """f^j(u) = A^j u with constant viscosity table ``B[j][k]`` (default Laplacian)."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 3 or A.shape[1] != A.shape[2]:
        raise ConfigError("A must be a list of d square n x n matrices")
    d, n, _ = A.shape
    if B is None:
        Bt = np.einsum("jk,ab->jkab", np.eye(d), np.eye(n))
    else:
        Bt = np.asarray(B, dtype=float)
        if Bt.shape != (d, d, n, n):
            raise ConfigError(f"B must have shape {(d, d, n, n)}, got {Bt.shape}")
    return SystemSpec(
        n=n, d=d,
        flux=tuple(_linear(A[j]) for j in range(d)),
        flux_jacobian=tuple(_const(A[j]) for j in range(d)),
        viscosity=tuple(tuple(_const(Bt[j, k]) for k in range(d)) for j in range(d)),
        viscosity_derivative=tuple(tuple(_const(np.zeros((n, n, n))) for _ in range(d)) for _ in range(d)),
        laplacian_flag=_is_laplacian(Bt),
        name="constant_coefficient",
        description={"A": A.tolist(), "B": Bt.tolist()},
        box=None if box is None else tuple(map(tuple, box)),
        flux_hessian=tuple(_const(np.zeros((n, n, n))) for _ in range(d)),
    )


_PSYS_VARS = {"v": 0, "w": 1, "u1": 0, "u2": 1}


def vdw_psystem(pressure: str = "v^3 - v", d: int = 2, transverse=None, box=None) -> SystemSpec:
    """p-system u = (v, w), f^1 = (-w, p(v)), Laplacian viscosity.

    ``transverse`` optionally maps a spatial index j >= 2 (1-based) to two
    expression strings giving f^j; unspecified transverse fluxes vanish.
    """
    if d < 1:
        raise ConfigError("d must be >= 1")
    p = parse_polynomial(pressure, {"v": 0, "u1": 0})
    p2 = Polynomial(2, tuple((c, (e[0], 0)) for c, e in p.terms))
    w = Polynomial.variable(2, 1)
    fluxes = [FluxExpression((-w, p2))]
    transverse = {int(k): v for k, v in (transverse or {}).items()}
    for j in range(2, d + 1):
        exprs = transverse.pop(j, None)
        if exprs is None:
            fluxes.append(FluxExpression((Polynomial(2), Polynomial(2))))
        else:
            if len(exprs) != 2:
                raise ConfigError(f"transverse flux f^{j} needs two components")
            fluxes.append(FluxExpression(tuple(parse_polynomial(t, _PSYS_VARS) for t in exprs)))
    if transverse:
        raise ConfigError(f"transverse flux index out of range: {sorted(transverse)}")
    desc = {"pressure": p.to_string(("v",)), "flux": [F.to_strings(("v", "w")) for F in fluxes]}
    return polynomial_system(fluxes, name="vdw_psystem", description=desc,
                             box=box if box is not None else ((0.5, 1.5), (-0.5, 0.5)))


def builtin_system(name: str, params: dict[str, Any] | None = None) -> SystemSpec:
    """Construct a built-in system.

    ``constant_coefficient``: params ``A`` (d matrices) and optional ``B``
    (d x d table of n x n matrices, default Laplacian).

    ``vdw_psystem``: params ``pressure`` (polynomial in v), ``d`` (default 2),
    optional ``transverse`` ({j: [expr, expr]}).

    ``polynomial``: params ``flux`` (d lists of n expression strings in
    u1..un) and optional ``viscosity`` (``"laplacian"`` or a d x d x n x n table).
    """
    params = dict(params or {})
    box = params.pop("box", None)
    if name == "constant_coefficient":
        if "A" not in params:
            raise ConfigError("constant_coefficient requires parameter 'A'")
        try:
            out = constant_coefficient_system(params.pop("A"), params.pop("B", None), box=box)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"ill-shaped constant_coefficient parameters: {exc}") from exc
    elif name == "vdw_psystem":
        if "pressure" not in params:
            raise ConfigError("vdw_psystem requires parameter 'pressure'")
        out = vdw_psystem(params.pop("pressure"), int(params.pop("d", 2)),
                          params.pop("transverse", None), box=box)
    elif name == "polynomial":
        if "flux" not in params:
            raise ConfigError("polynomial system requires parameter 'flux'")
        rows = params.pop("flux")
        n = len(rows[0])
        from .polynomial import parse_flux_expression
        fluxes = [parse_flux_expression(r, n=n) for r in rows]
        out = polynomial_system(fluxes, box=box, viscosity=params.pop("viscosity", "laplacian"))
    else:
        raise ConfigError(f"unknown builtin system {name!r}")
    if params:
        raise ConfigError(f"unknown parameters for {name}: {sorted(params)}")
    return out


# hypothesis checks --------------------------------------------------------

def box_samples(sys: SystemSpec, count: int, seed: int = 0) -> np.ndarray:
    """Seeded Halton points in the working box, shape ``(count, n)``."""
    box = sys.working_box
    pts = qmc.Halton(d=sys.n, scramble=True, seed=seed).random(count)
    return box[:, 0] + pts * (box[:, 1] - box[:, 0])


def sphere_directions(d: int, count: int) -> np.ndarray:
    """Deterministic near-uniform unit vectors in R^d.

    d = 2: ``count`` uniform angles on [0, 2pi).  d = 3: Fibonacci lattice.
    """
    if d == 1:
        return np.array([[1.0], [-1.0]])[:count]
    if d == 2:
        t = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    if d == 3:
        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        phi = np.pi * (1 + 5 ** 0.5) * k
        r = np.sqrt(1 - z * z)
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    g = np.random.default_rng(0).standard_normal((count, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def viscosity_along(sys: SystemSpec, nu, u) -> np.ndarray:
    """sum_{jk} nu_j nu_k B^{jk}(u)."""
    nu = np.asarray(nu, dtype=float)
    out = 0.0
    for j in range(sys.d):
        for k in range(sys.d):
            if nu[j] != 0.0 and nu[k] != 0.0:
                out = out + nu[j] * nu[k] * sys.B(j, k, u)
    if np.isscalar(out):
        u = np.asarray(u)
        return np.zeros((sys.n, sys.n) + u.shape[1:])
    return np.asarray(out)


def check_parabolicity(sys: SystemSpec, directions=None, states=None, threshold: float = 1e-8):
    """Smallest real part of spec(sum nu_j nu_k B^{jk}(u)) over the samples.

    Returns ``{"theta_estimate": float, "pass": bool}``.  For Laplacian
    systems the matrix is the identity for every unit direction, so the
    estimate is exactly 1.
    """
    if directions is None:
        directions = sphere_directions(sys.d, 64 if sys.d == 2 else 242)
    if states is None:
        states = box_samples(sys, 64)
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if directions.size == 0 or states.size == 0:
        raise ValueError("need nonempty direction and state samples")
    if sys.laplacian_flag:
        theta = 1.0
    else:
        theta = np.inf
        for nu in directions:
            for u in states:
                M = viscosity_along(sys, nu, u)
                try:
                    ev = np.linalg.eigvals(M)
                except np.linalg.LinAlgError as exc:
                    raise HypothesisError(f"eigenvalue failure at nu={nu.tolist()}, u={u.tolist()}") from exc
                if not np.all(np.isfinite(ev)):
                    raise HypothesisError(f"non-finite eigenvalues at nu={nu.tolist()}, u={u.tolist()}")
                theta = min(theta, float(ev.real.min()))
    return {"theta_estimate": float(theta), "pass": bool(theta > threshold)}


def flux_jacobian_error(sys: SystemSpec, count: int = 100, seed: int = 0, h: float = 1e-6) -> float:
    """Max relative mismatch between flux_jacobian and central differences of flux."""
    worst = 0.0
    for u in box_samples(sys, count, seed):
        for j in range(sys.d):
            J = np.asarray(sys.df(j, u), dtype=float)
            fd = np.empty_like(J)
            for m in range(sys.n):
                e = np.zeros(sys.n)
                e[m] = h
                fd[:, m] = (np.asarray(sys.f(j, u + e)) - np.asarray(sys.f(j, u - e))) / (2 * h)
            scale = max(1.0, np.abs(J).max())
            worst = max(worst, float(np.abs(fd - J).max() / scale))
    return worst
