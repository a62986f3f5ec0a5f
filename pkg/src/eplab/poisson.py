"""Free-space solvers for ``lap phi = 4 pi rho`` with ``phi -> 0`` at infinity.

Radial densities use the shell-theorem quadrature

    phi(r) = -4 pi [ M(r) / r + int_r^inf rho(s) s ds ],   M(r) = int_0^r rho s^2 ds,

with high-order cumulative integration on the grid and an inverse-power tail
model ``rho ~ c0 s^-p + c1 s^-(p+2)`` beyond ``r_max``. Box densities use a
zero-padded FFT convolution with a kernel derived from the Green's
function ``-1/|x|`` truncated at the box diameter, which is spectrally
accurate for smooth densities.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from . import _quadrature as quad
from .grid import BoxGrid, GridFunction, derivative, radial_derivative
from .wsobolev import WeightedNormSpec, fft_workers, weighted_norm

__all__ = [
    "PotentialField",
    "EllipticReport",
    "solve_poisson_radial",
    "solve_poisson_box",
    "enclosed_mass",
    "elliptic_estimate_report",
    "DEFAULT_TAIL_EXPONENT",
]

DEFAULT_TAIL_EXPONENT = 5.0


@dataclass(frozen=True)
class PotentialField:
    """Potential, its gradient and solver diagnostics.

    ``residual`` is the max-norm of the discrete ``lap phi - 4 pi rho`` over
    interior nodes. ``flagged`` marks a density whose far tail is not
    integrable under the tail model (or a box density touching the faces).
    """

    phi: GridFunction
    grad: GridFunction
    residual: float
    flagged: bool = False


def enclosed_mass(rho: np.ndarray, h: float) -> np.ndarray:
    """``int_0^{r_i} rho s^2 ds`` at every cell centre (no ``4 pi``)."""
    return quad.cumulative(rho, h, 1, k=2)


def radial_gravity(rho: np.ndarray, h: float) -> np.ndarray:
    """``d phi / dr = 4 pi M(r) / r^2`` on a radial grid."""
    r = (np.arange(rho.shape[0]) + 0.5) * h
    return 4.0 * np.pi * enclosed_mass(rho, h) / (r * r)


def solve_poisson_radial(rho: GridFunction,
                         tail_exponent: float = DEFAULT_TAIL_EXPONENT) -> PotentialField:
    """Potential of a radial density."""
    g = rho.geometry
    if g.kind != "radial" or rho.rank != "scalar":
        raise ValueError("solve_poisson_radial needs a scalar radial density")
    r, h, data = g.r, g.h, rho.samples
    inner = quad.cumulative(data, h, 1, k=2)
    outer = quad.integrate(data, h, 1, k=1) - quad.cumulative(data, h, 1, k=1)
    coeffs = quad.inverse_power_fit(r, data, tail_exponent)
    tail = quad.inverse_power_moment(coeffs, tail_exponent, 1, g.r_max)
    flagged = not np.isfinite(tail) or tail_exponent <= 3.0
    if not np.isfinite(tail):
        tail = 0.0
    phi = -4.0 * np.pi * (inner / r + outer + tail)
    dphi = 4.0 * np.pi * inner / (r * r)
    lap = radial_derivative(dphi, h, -1) + 2.0 * dphi / r
    resid = lap - 4.0 * np.pi * data
    residual = float(np.max(np.abs(resid[:-2])))
    return PotentialField(GridFunction(g, phi), GridFunction(g, dphi, "radial-vector"),
                          residual, flagged)


@lru_cache(maxsize=4)
def _green_spectrum(n: int, h: float):
    """Spectrum of the discrete free-space kernel on the doubled grid.

    The kernel is built from the Green's function truncated at the box
    diameter, whose transform ``-4 pi (1 - cos(R k)) / k^2`` is smooth, on a
    4x oversampled grid; its real-space samples at separations below the box
    width are then embedded in the doubled grid used for the convolution.
    """
    m = 4 * n
    reach = 1.05 * np.sqrt(3.0) * n * h
    k = 2.0 * np.pi * sfft.fftfreq(m, h)
    kz = 2.0 * np.pi * sfft.rfftfreq(m, h)
    k2 = k[:, None, None] ** 2 + k[None, :, None] ** 2 + kz[None, None, :] ** 2
    kk = np.sqrt(k2)
    with np.errstate(divide="ignore", invalid="ignore"):
        spec = -8.0 * np.pi * np.sin(0.5 * reach * kk) ** 2 / k2
    spec[0, 0, 0] = -2.0 * np.pi * reach ** 2
    kern = sfft.irfftn(spec, s=(m, m, m), workers=fft_workers()) / h ** 3
    del spec, k2, kk
    idx = np.r_[0:n, m - n:m]
    small = kern[np.ix_(idx, idx, idx)]
    return sfft.rfftn(small, workers=fft_workers())


def solve_poisson_box(rho: GridFunction, tail_tol: float = 1e-6) -> PotentialField:
    """Free-space potential of a box density by zero-padded FFT convolution."""
    g = rho.geometry
    if g.kind != "box" or rho.rank != "scalar":
        raise ValueError("solve_poisson_box needs a scalar box density")
    n, h = g.n, g.h
    data = rho.samples
    spec = _green_spectrum(n, h)
    dens = sfft.rfftn(data, s=(2 * n,) * 3, workers=fft_workers())
    phi = sfft.irfftn(dens * spec, s=(2 * n,) * 3, workers=fft_workers())[:n, :n, :n]
    phi = phi * h ** 3
    pot = GridFunction(g, phi)
    grad = np.stack([derivative(pot, ax).samples for ax in range(3)])
    lap = (-6.0 * phi[1:-1, 1:-1, 1:-1]
           + phi[2:, 1:-1, 1:-1] + phi[:-2, 1:-1, 1:-1]
           + phi[1:-1, 2:, 1:-1] + phi[1:-1, :-2, 1:-1]
           + phi[1:-1, 1:-1, 2:] + phi[1:-1, 1:-1, :-2]) / h ** 2
    residual = float(np.max(np.abs(lap - 4.0 * np.pi * data[1:-1, 1:-1, 1:-1])))
    peak = float(np.max(np.abs(data)))
    faces = max(float(np.max(np.abs(np.take(data, i, axis=ax))))
                for ax in range(3) for i in (0, -1))
    flagged = peak > 0 and faces > tail_tol * peak
    return PotentialField(pot, GridFunction(g, grad, "vector"), residual, flagged)


@dataclass(frozen=True)
class EllipticReport:
    """Ratio ``||grad phi||_{s-1,delta+1} / ||rho||_{s-2,delta+2}``."""

    ratio: float
    grad_norm: float
    rho_norm: float
    divergent: bool


def elliptic_estimate_report(rho, potential: PotentialField,
                             spec: WeightedNormSpec) -> EllipticReport:
    """Check the weighted elliptic estimate for a computed potential.

    Requires ``-3/2 < delta < -1/2`` and ``s >= 2``.
    """
    if not (-1.5 < spec.delta < -0.5):
        raise ValueError(f"elliptic estimate needs -3/2 < delta < -1/2, got {spec.delta}")
    if spec.s < 2:
        raise ValueError("elliptic estimate needs s >= 2 (negative orders unsupported)")
    grad_spec = WeightedNormSpec(spec.s - 1, spec.delta + 1, spec.j_max, spec.shell_n,
                                 spec.shell_half_width, spec.tail_tol, spec.method)
    rho_spec = WeightedNormSpec(spec.s - 2, spec.delta + 2, spec.j_max, spec.shell_n,
                                spec.shell_half_width, spec.tail_tol, spec.method)
    gn = weighted_norm(potential.grad, grad_spec)
    rn = weighted_norm(rho, rho_spec)
    return EllipticReport(gn.norm / rn.norm, gn.norm, rn.norm, gn.divergent or rn.divergent)
