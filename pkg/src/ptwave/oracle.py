"""Closed-form constant-coefficient Evans function and dispersion relation.

For f^j(u) = A^j u and constant B^{jk}, solutions of the eigenvalue ODE are
exponentials e^{mu x_1} with mu a root of the quadratic matrix polynomial

    det(mu^2 B^11 + mu (-A^1 + i B^{xi1} + i B^{1xi}) - (i A^xi + B^{xixi} + lam I)) = 0

and the Evans function over an artificial period X is
prod_l (e^{mu_l X} - e^{i xi_1 X}).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model import SystemSpec, constant_coefficient_system
from .util import min_gap


@dataclass(frozen=True)
class ConstCoeffSystem:
    """Constant matrices ``A`` (d, n, n) and ``B`` (d, d, n, n) with period ``X``."""

    A: np.ndarray
    B: np.ndarray | None = None
    X: float = 2 * np.pi

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        d, n, _ = A.shape
        B = (np.einsum("jk,ab->jkab", np.eye(d), np.eye(n)) if self.B is None
             else np.array(self.B, dtype=float))
        if B.shape != (d, d, n, n):
            raise ConfigError(f"B must have shape {(d, d, n, n)}")
        if abs(np.linalg.det(B[0, 0])) < 1e-14:
            raise ConfigError("B^11 must be invertible")
        if np.linalg.eigvals(B[0, 0]).real.min() <= 0:
            raise ConfigError("parabolicity fails for nu = e_1")
        if not self.X > 0:
            raise ConfigError("period X must be positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "X", float(self.X))

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def d(self) -> int:
        return self.A.shape[0]

    def to_system(self) -> SystemSpec:
        return constant_coefficient_system(self.A, self.B)

    def symbols(self, xi_t):
        """(A^xi, B^{1xi}, B^{xi1}, B^{xixi}) for the transverse wave vector."""
        xi_t = np.atleast_1d(np.asarray(xi_t, dtype=float))
        n, d = self.n, self.d
        Axi = sum((xi_t[j - 1] * self.A[j] for j in range(1, d)), np.zeros((n, n)))
        B1x = sum((xi_t[k - 1] * self.B[0, k] for k in range(1, d)), np.zeros((n, n)))
        Bx1 = sum((xi_t[j - 1] * self.B[j, 0] for j in range(1, d)), np.zeros((n, n)))
        Bxx = sum((xi_t[j - 1] * xi_t[k - 1] * self.B[j, k]
                   for j in range(1, d) for k in range(1, d)), np.zeros((n, n)))
        return Axi, B1x, Bx1, Bxx


def char_polynomial_matrix(sys: ConstCoeffSystem, mu, lam, xi_t) -> np.ndarray:
    Axi, B1x, Bx1, Bxx = sys.symbols(xi_t)
    return (mu**2 * sys.B[0, 0] + mu * (-sys.A[0] + 1j * Bx1 + 1j * B1x)
            - (1j * Axi + Bxx + lam * np.eye(sys.n)))


def characteristic_roots(sys: ConstCoeffSystem, lam, xi_t=None) -> np.ndarray:
    """The 2n roots mu of the characteristic matrix polynomial (companion form)."""
    n = sys.n
    xi_t = np.zeros(sys.d - 1) if xi_t is None else xi_t
    Axi, B1x, Bx1, Bxx = sys.symbols(xi_t)
    Binv = np.linalg.inv(sys.B[0, 0])
    K1 = -sys.A[0] + 1j * Bx1 + 1j * B1x
    K0 = 1j * Axi + Bxx + complex(lam) * np.eye(n)
    comp = np.zeros((2 * n, 2 * n), dtype=complex)
    comp[:n, n:] = np.eye(n)
    comp[n:, :n] = Binv @ K0
    comp[n:, n:] = -Binv @ K1
    mu = np.linalg.eigvals(comp)
    mu = mu[np.lexsort((mu.imag, mu.real))]
    if mu.size > 1:
        gap = min_gap(mu)
        if gap < 1e-10:
            warnings.warn("characteristic roots nearly coincide (defective pencil possible)",
                          RuntimeWarning, stacklevel=2)
    return mu


def evans_closed_form(sys: ConstCoeffSystem, lam, xi1: float = 0.0, xi_t=None) -> complex:
    """prod_l (e^{mu_l X} - e^{i xi_1 X})."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mu = characteristic_roots(sys, lam, xi_t)
    return complex(np.prod(np.exp(mu * sys.X) - np.exp(1j * xi1 * sys.X)))


def evans_normalization(sys: ConstCoeffSystem) -> float:
    """Factor relating the normalized-basis Evans function to the closed form.

    D_normalized = (-1)^n / det(B^11) * prod_l (e^{mu_l X} - e^{i xi_1 X}).
    """
    return (-1) ** sys.n / float(np.linalg.det(sys.B[0, 0]))


def dispersion_roots(sys: ConstCoeffSystem, xi) -> np.ndarray:
    """Eigenvalues of -B^xi - i A^xi (full wave vector ``xi``)."""
    xi = np.asarray(xi, dtype=float)
    d, n = sys.d, sys.n
    Axi = sum(xi[j] * sys.A[j] for j in range(d))
    Bxi = sum(xi[j] * xi[k] * sys.B[j, k] for j in range(d) for k in range(d))
    lam = np.linalg.eigvals(-Bxi - 1j * Axi)
    return lam[np.lexsort((lam.real, lam.imag))]
