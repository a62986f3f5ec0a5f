"""Equation of state, Makino variables and the static gamma = 6/5 profile.

For a polytropic gas ``p = K rho^gamma`` the Makino variable

    w = (2 sqrt(K gamma) / (gamma - 1)) rho^((gamma - 1) / 2)

symmetrises the Euler-Poisson system:

    w_t + v . grad w + (gamma - 1)/2 w div v = 0
    v_t + (v . grad) v + (gamma - 1)/2 w grad w = -grad phi,   lap phi = 4 pi rho.

The inverse map is ``rho = c w^beta`` with ``beta = 2 / (gamma - 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .grid import GridFunction

__all__ = [
    "EosParams",
    "FluidState",
    "StaticProfile",
    "pressure",
    "makino_w",
    "density_from_w",
    "flux_matrices",
    "static_profile",
    "hydrostatic_K",
    "check_theorem_range",
]


@dataclass(frozen=True)
class EosParams:
    """Polytropic equation of state ``p = K rho^gamma``.

    Any ``gamma > 1`` is accepted for the algebra; simulations additionally
    require ``1 < gamma < 5/3`` (see :func:`check_theorem_range`).
    """

    gamma: float
    K: float

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if not self.K > 0.0:
            raise ValueError(f"K must be positive, got {self.K}")

    @property
    def beta(self) -> float:
        """Exponent in ``rho = c w^beta``."""
        return 2.0 / (self.gamma - 1.0)

    @property
    def makino_coeff(self) -> float:
        """Prefactor in ``w = makino_coeff * rho^((gamma - 1) / 2)``."""
        return 2.0 * np.sqrt(self.K * self.gamma) / (self.gamma - 1.0)

    @property
    def density_coeff(self) -> float:
        """``c`` in ``rho = c w^beta``."""
        return self.makino_coeff ** (-self.beta)

    @property
    def half_gm1(self) -> float:
        return 0.5 * (self.gamma - 1.0)


def check_theorem_range(gamma: float) -> None:
    """Raise unless ``1 < gamma < 5/3``."""
    if not (1.0 < gamma < 5.0 / 3.0):
        raise ValueError(f"gamma = {gamma} is outside the admissible range 1 < gamma < 5/3")


def pressure(rho, eos: EosParams):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("density must be non-negative")
    return eos.K * rho ** eos.gamma


def makino_w(rho, eos: EosParams):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("density must be non-negative")
    return eos.makino_coeff * rho ** eos.half_gm1


def density_from_w(w, eos: EosParams):
    """``rho = c w^beta``; negative ``w`` (clipping undershoot) maps to 0."""
    w = np.asarray(w, dtype=float)
    # (w / coeff)^beta avoids under/overflow of c and w^beta separately when beta is large
    return (np.maximum(w, 0.0) / eos.makino_coeff) ** eos.beta


@dataclass(frozen=True)
class FluidState:
    """Makino variable ``w`` and velocity ``v`` at time ``t``.

    On a radial grid ``v`` is a radial-vector field; on a box grid it is a
    Cartesian vector field.
    """

    w: GridFunction
    v: GridFunction
    t: float = 0.0

    def __post_init__(self):
        if self.w.geometry != self.v.geometry:
            raise ValueError("w and v must share a grid")
        if self.w.rank != "scalar":
            raise ValueError("w must be a scalar field")
        expected = "radial-vector" if self.w.geometry.kind == "radial" else "vector"
        if self.v.rank != expected:
            raise ValueError(f"v must be a {expected} field on this grid")

    @property
    def geometry(self):
        return self.w.geometry


def flux_matrices(w, v, eos: EosParams, direction):
    """Symbol ``sum_a A^a(U) n_a`` of the symmetric hyperbolic system.

    ``w`` is a scalar, ``v`` and ``direction`` are 3-vectors. Row and column
    order is ``(w, v_1, v_2, v_3)``; the matrix is symmetric with
    eigenvalues ``v.n`` (twice) and ``v.n +/- (gamma - 1)/2 w |n|``.
    """
    v = np.asarray(v, dtype=float)
    n = np.asarray(direction, dtype=float)
    vn = float(v @ n)
    a = np.zeros((4, 4))
    a[0, 0] = vn
    a[1:, 1:] = vn * np.eye(3)
    a[0, 1:] = a[1:, 0] = eos.half_gm1 * w * n
    return a


@dataclass(frozen=True)
class StaticProfile:
    """Closed-form static solution for ``gamma = 6/5`` with core radius ``a``.

    ``rho = a^{5/2} (a^2 + r^2)^{-5/2}``,
    ``phi = -(4 pi / 3) sqrt(a) (a^2 + r^2)^{-1/2}`` and total mass
    ``(4 pi / 3) sqrt(a)``; hydrostatic balance holds with ``K = 2 pi / 9``.
    """

    a: float

    K_static = 2.0 * np.pi / 9.0
    gamma = 1.2

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("core radius must be positive")

    @property
    def eos(self) -> EosParams:
        return EosParams(self.gamma, self.K_static)

    @property
    def mass(self) -> float:
        return 4.0 * np.pi / 3.0 * np.sqrt(self.a)

    def rho(self, r):
        r = np.asarray(r, dtype=float)
        return self.a ** 2.5 * (self.a ** 2 + r * r) ** -2.5

    def phi(self, r):
        r = np.asarray(r, dtype=float)
        return -4.0 * np.pi / 3.0 * np.sqrt(self.a) / np.sqrt(self.a ** 2 + r * r)

    def dphi(self, r):
        """``d phi / dr``: the radial component of ``grad phi``."""
        r = np.asarray(r, dtype=float)
        return 4.0 * np.pi / 3.0 * np.sqrt(self.a) * r * (self.a ** 2 + r * r) ** -1.5

    def w(self, r):
        return makino_w(self.rho(r), self.eos)


def static_profile(a: float = 1.0) -> StaticProfile:
    return StaticProfile(a)


def hydrostatic_K(rho, gamma: float, radii=None) -> float:
    """Polytropic constant that puts a radial density in hydrostatic balance.

    Balance reads ``K gamma rho^(gamma-2) rho' = -phi'`` with
    ``phi'(r) = 4 pi M(<r) / r^2``. The enclosed mass comes from adaptive
    quadrature and ``rho'`` from a centred difference; ``K`` is the least
    squares fit over ``radii``.
    """
    radii = np.linspace(0.1, 10.0, 40) if radii is None else np.asarray(radii, float)
    lhs, rhs = [], []
    for r in radii:
        m = quad(lambda s: rho(s) * s * s, 0.0, r, epsabs=0, epsrel=1e-13)[0]
        dphi = 4.0 * np.pi * m / r ** 2
        eps = 1e-5 * max(r, 1.0)
        drho = (rho(r + eps) - rho(r - eps)) / (2 * eps)
        lhs.append(gamma * rho(r) ** (gamma - 2.0) * drho)
        rhs.append(-dphi)
    lhs, rhs = np.array(lhs), np.array(rhs)
    return float(lhs @ rhs / (lhs @ lhs))
