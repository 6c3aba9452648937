"""Numerical checks of the low-frequency structure of the Evans function.

D(rho xi_hat, rho lam_hat) is sampled on geometric grids rho_k = rho_0 2^-k.
The leading homogeneous coefficient comes from Richardson extrapolation of
D / rho^(n+1) and the vanishing order from extrapolated log_2 slopes.
Both are needed because the remainder can carry large constants: an extra
Floquet root at distance r from the origin adds a relative correction of
size rho / r to D / rho^(n+1).
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .dispersion import check_nondegenerate, delta
from .errors import ConfigError, ConvergenceError
from .manifold import HomogenizedJacobians
from .util import richardson, write_json

SCHEMA_VERSION = 1


def rho_grid(rho0: float = 1e-2, K: int = 6) -> np.ndarray:
    """Geometric grid rho0 2^-k, k = 0..K."""
    if K < 1:
        raise ConfigError("rho grid needs K >= 1")
    return rho0 * 2.0 ** -np.arange(K + 1)


@dataclass
class LeadingFit:
    order: float           # extrapolated limit of the log_2 slopes
    coefficient: complex   # extrapolated D / rho^degree
    degree: int
    rho: np.ndarray
    values: np.ndarray     # D(rho_k xi_hat, rho_k lam_hat)
    slopes: np.ndarray     # raw log_2 |D(rho_k) / D(rho_{k+1})|
    order_error: float
    coefficient_error: float
    converged: bool
    message: str = ""

    @property
    def raw_order(self) -> float:
        return float(self.slopes[-1])


def _direction_values(evans, xi_hat, lam_hat, rho):
    xi_hat = np.asarray(xi_hat, dtype=float)
    return np.array([complex(evans(r * xi_hat, r * complex(lam_hat))) for r in rho])


def fit_leading_part(evans, xi_hat, lam_hat, rho0: float = 1e-2, K: int = 6, degree: int | None = None,
                     levels: int = 3, rtol: float = 1e-3) -> LeadingFit:
    """Vanishing order and leading coefficient of D along one direction.

    Parameters
    ----------
    evans : callable
        ``evans(xi, lam)`` with ``xi`` the full wave vector.
    degree : int, optional
        Homogeneity degree used for the coefficient; defaults to the
        rounded extrapolated order.
    levels : int
        Richardson elimination steps for both the order and the coefficient.

    The fit is flagged non-convergent (``converged = False`` with a message)
    when the extrapolated order is not within 0.05 of an integer or the
    coefficient's relative error estimate exceeds ``rtol``.
    """
    rho = rho_grid(rho0, K)
    D = _direction_values(evans, xi_hat, lam_hat, rho)
    if np.any(D == 0) or not np.all(np.isfinite(D)):
        raise ConvergenceError("D vanishes or is not finite on the rho grid")
    slopes = np.log2(np.abs(D[:-1] / D[1:]))
    order, oerr = richardson(slopes, levels=min(levels, slopes.size - 1))
    order = float(np.real(order))
    p = int(np.rint(order)) if degree is None else int(degree)
    coef, cerr = richardson(D / rho ** p, levels=levels)
    msgs = []
    if abs(order - np.rint(order)) > 0.05:
        msgs.append(f"order {order:.4f} not close to an integer (window too large?)")
    rel = cerr / max(abs(coef), 1e-300)
    if rel > rtol:
        msgs.append(f"coefficient not converged (relative change {rel:.2e})")
    return LeadingFit(order=order, coefficient=complex(coef), degree=p, rho=rho, values=D,
                      slopes=slopes, order_error=float(oerr), coefficient_error=float(cerr),
                      converged=not msgs, message="; ".join(msgs))


def cauchy_coefficient(f, k: int, radius: float, N: int = 64) -> complex:
    """k-th Taylor coefficient of analytic ``f`` (vectorized) at 0 from a circle of given radius."""
    z = radius * np.exp(2j * np.pi * np.arange(N) / N)
    vals = np.asarray(f(z))
    return complex(np.mean(vals * np.exp(-2j * np.pi * k * np.arange(N) / N)) / radius ** k)


def product_sphere_directions(d: int, count: int, seed: int = 0, lam_min: float = 0.3,
                              symmetric: bool = False) -> list[tuple[np.ndarray, complex]]:
    """Directions (xi_hat, lam_hat) with |xi_hat|^2 + |lam_hat|^2 = 1 and |lam_hat| >= lam_min.

    With ``symmetric`` the set is closed under (xi, lam) -> (-xi, conj lam)
    (``count`` must be even).
    """
    rng = np.random.default_rng(seed)
    base = count // 2 if symmetric else count
    out = []
    while len(out) < base:
        v = rng.standard_normal(d + 2)
        v /= np.linalg.norm(v)
        lam = complex(v[d], v[d + 1])
        if abs(lam) >= lam_min:
            out.append((v[:d], lam))
    if symmetric:
        out = out + [(-x, np.conj(l)) for x, l in out]
    return out


@dataclass
class DirectionFit:
    xi_hat: np.ndarray
    lam_hat: complex
    fit: LeadingFit
    delta: complex
    ratio: complex
    remainder_slope: float = np.nan
    delta1: complex | None = None


@dataclass
class TheoremOneReport:
    degree: int
    directions: list = field(default_factory=list)
    gamma0: complex = 0j
    spread: float = np.inf
    remainder_slope: float = np.nan
    min_order: float = np.nan
    max_order: float = np.nan
    spread_tol: float = 1e-2
    slope_target: float = np.nan
    passed: bool = False
    variational: dict | None = None
    resampled: int = 0

    @property
    def ratios(self) -> np.ndarray:
        return np.array([r.ratio for r in self.directions])

    def to_dict(self) -> dict:
        def c(z):
            return [float(np.real(z)), float(np.imag(z))]
        return {
            "schema_version": SCHEMA_VERSION, "kind": "theorem1_report",
            "degree": self.degree, "gamma0": c(self.gamma0), "spread": self.spread,
            "remainder_slope": self.remainder_slope, "slope_target": self.slope_target,
            "min_order": self.min_order, "max_order": self.max_order,
            "spread_tol": self.spread_tol, "passed": self.passed, "resampled": self.resampled,
            "variational": self.variational,
            "directions": [{
                "xi_hat": r.xi_hat.tolist(), "lam_hat": c(r.lam_hat),
                "order": r.fit.order, "raw_order": r.fit.raw_order,
                "coefficient": c(r.fit.coefficient), "coefficient_error": r.fit.coefficient_error,
                "delta": c(r.delta), "ratio": c(r.ratio), "remainder_slope": r.remainder_slope,
                "delta1": None if r.delta1 is None else c(r.delta1)}
                for r in self.directions],
        }

    def save(self, path):
        write_json(path, self.to_dict())

    def summary(self) -> str:
        lines = [f"{'xi_hat':>24} {'lam_hat':>26} {'order':>8} {'|ratio|':>12} {'slope':>7}"]
        for r in self.directions:
            xs = ",".join(f"{v:+.3f}" for v in r.xi_hat)
            lines.append(f"{xs:>24} {r.lam_hat.real:+.5f}{r.lam_hat.imag:+.5f}j "
                         f"{r.fit.order:8.4f} {abs(r.ratio):12.6g} {r.remainder_slope:7.3f}")
        lines.append(f"Gamma0 = {self.gamma0.real:.10g}{self.gamma0.imag:+.3g}j  spread = {self.spread:.3e}  "
                     f"remainder slope = {self.remainder_slope:.3f} (target {self.slope_target:.2f})  "
                     f"{'PASS' if self.passed else 'FAIL'}")
        if self.variational:
            v = self.variational
            lines.append(f"variational: max |fit - Delta_1| / |Delta_1| = {v['max_fit_vs_delta1']:.3e}, "
                         f"ratio spread = {v['spread']:.3e}")
        return "\n".join(lines)


def _remainder_slope(values, rho, target, gamma0, delta_val, last: int = 3) -> float:
    rem = np.abs(values - gamma0 * rho ** target * delta_val)[-last:]
    r = rho[-last:]
    if np.any(rem == 0):
        return np.inf
    return float(np.polyfit(np.log(r), np.log(rem), 1)[0])


def verify_theorem1(evans, H: HomogenizedJacobians, directions=10, rho0: float = 1e-2, K: int = 6,
                    seed: int = 0, lam_min: float = 0.3, floor: float = 1e-3, max_resample: int = 100,
                    symmetric: bool = False, levels: int = 3, spread_tol: float = 1e-2,
                    leading=None, threads: int = 1) -> TheoremOneReport:
    """Fit Gamma_0 in D = Gamma_0 Delta + O(rho^(n+2)) over sampled directions.

    ``directions`` is a count (sampled on the product sphere) or a list of
    (xi_hat, lam_hat) pairs.  Sampled directions with |Delta| below
    ``floor`` times the median are resampled.  ``leading`` (a variational
    :class:`~ptwave.variational.LeadingPart`) adds the three-way comparison
    between the fitted coefficient, Delta_1 and Gamma_0 Delta.
    """
    check_nondegenerate(H)
    n = H.n
    degree = n + 1
    resampled = 0
    if isinstance(directions, (int, np.integer)):
        count = int(directions)
        dirs = product_sphere_directions(H.d, count, seed, lam_min, symmetric)
        vals = np.array([abs(delta(H, x, l)) for x, l in dirs])
        scale = np.median(vals)
        rng_seed = seed + 1
        for i in range(len(dirs)):
            tries = 0
            while vals[i] < floor * scale:
                if tries >= max_resample:
                    raise ConvergenceError("could not sample a direction away from the zero set of Delta")
                x, l = product_sphere_directions(H.d, 1, rng_seed, lam_min)[0]
                rng_seed += 1
                tries += 1
                resampled += 1
                if symmetric and i >= len(dirs) // 2:
                    x, l = -dirs[i - len(dirs) // 2][0], np.conj(dirs[i - len(dirs) // 2][1])
                dirs[i] = (x, l)
                vals[i] = abs(delta(H, x, l))
    else:
        dirs = [(np.asarray(x, dtype=float), complex(l)) for x, l in directions]
    if len(dirs) < 1:
        raise ConfigError("no directions")

    def run(dl):
        x, l = dl
        return fit_leading_part(evans, x, l, rho0, K, degree=degree, levels=levels)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            fits = list(pool.map(run, dirs))
    else:
        fits = [run(dl) for dl in dirs]
    rep = TheoremOneReport(degree=degree, spread_tol=spread_tol, slope_target=n + 2 - 0.2,
                           resampled=resampled)
    for (x, l), ft in zip(dirs, fits):
        dv = complex(delta(H, x, l))
        rep.directions.append(DirectionFit(x, l, ft, dv, ft.coefficient / dv))
    ratios = rep.ratios
    rep.gamma0 = complex(ratios.mean())
    rep.spread = float(np.std(ratios) / abs(rep.gamma0))
    for r in rep.directions:
        r.remainder_slope = _remainder_slope(r.fit.values, r.fit.rho, degree, rep.gamma0, r.delta)
    rep.remainder_slope = float(min(r.remainder_slope for r in rep.directions))
    orders = [r.fit.order for r in rep.directions]
    rep.min_order, rep.max_order = float(min(orders)), float(max(orders))
    rep.passed = bool(rep.gamma0 != 0 and np.all(np.isfinite(ratios)) and rep.spread <= spread_tol
                      and rep.remainder_slope >= rep.slope_target)
    if leading is not None:
        d1 = np.array([leading(x, l) for x, l in dirs])
        for r, v in zip(rep.directions, d1):
            r.delta1 = complex(v)
        coefs = np.array([r.fit.coefficient for r in rep.directions])
        vr = d1 / np.array([r.delta for r in rep.directions])
        gv = vr.mean()
        rep.variational = {
            "max_fit_vs_delta1": float(np.max(np.abs(coefs - d1) / np.abs(d1))),
            "gamma_variational": [float(gv.real), float(gv.imag)],
            "spread": float(np.std(vr) / abs(gv)),
            "gamma_agreement": float(abs(gv - rep.gamma0) / abs(rep.gamma0)),
        }
    return rep


def leading_identity(leading, H: HomogenizedJacobians, points) -> tuple[complex, float, np.ndarray]:
    """Ratios Delta_1 / (lam^(1-d) Delta_hat omega^-n) over ``points`` (pairs (xi, lam)).

    Returns ``(mean ratio, spread = std / |mean|, ratios)``.
    """
    n = H.n
    ratios = np.array([leading(x, l) / (delta(H, x, l) * H.omega ** (-n)) for x, l in points])
    m = ratios.mean()
    return complex(m), float(np.std(ratios) / abs(m)), ratios


@dataclass
class CorollaryOneResult:
    deviations: np.ndarray   # per direction max matched deviation
    max_deviation: float
    passed: bool
    tol: float

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "kind": "corollary1",
                "deviations": self.deviations.tolist(), "max_deviation": self.max_deviation,
                "passed": self.passed, "tol": self.tol}


def verify_corollary1(branches, characteristics, xi_hats=None, tol: float = 1e-3) -> CorollaryOneResult:
    """Match Evans root branch limits against -i a_j(xi_hat) by optimal assignment.

    ``branches`` are :class:`~ptwave.evans.RootBranches` (or arrays of
    limits) and ``characteristics`` are
    :class:`~ptwave.dispersion.Characteristics` (or arrays of a_j), one per
    direction.  A branch count different from the number of characteristic
    values raises :class:`ConvergenceError`.
    """
    if len(branches) != len(characteristics):
        raise ConfigError("branches and characteristics must cover the same directions")
    if xi_hats is not None and len(xi_hats) != len(branches):
        raise ConfigError("xi_hat set does not match the inputs")
    devs = []
    for b, ch in zip(branches, characteristics):
        lim = np.asarray(getattr(b, "limits", b), dtype=complex)
        a = np.asarray(getattr(ch, "a", ch), dtype=complex)
        if getattr(b, "matched", True) is False:
            raise ConvergenceError(f"root tracking failed: {b.message}")
        if lim.size != a.size or np.any(~np.isfinite(lim)):
            raise ConvergenceError(f"branch count {lim.size} != {a.size}")
        target = -1j * a
        cost = np.abs(lim[:, None] - target[None, :])
        r, c = linear_sum_assignment(cost)
        devs.append(float(cost[r, c].max()))
    devs = np.array(devs)
    mx = float(devs.max()) if devs.size else 0.0
    return CorollaryOneResult(devs, mx, bool(mx <= tol), tol)
