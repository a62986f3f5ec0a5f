"""High-order quadrature on cell-centred radial grids.

Integrals are built from the degree-6 Lagrange interpolant through seven
neighbouring samples. Ghost samples left of the origin come from the parity
of the integrand; near ``r_max`` the stencil shifts inwards.
"""

from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np

_HALF = 3  # stencil half-width


@lru_cache(maxsize=None)
def _basis(offsets: tuple) -> np.ndarray:
    """Monomial coefficients ``L[m, p]`` of the Lagrange basis on ``offsets``."""
    o = np.asarray(offsets, dtype=float)
    vander = o[:, None] ** np.arange(o.size)[None, :]
    return np.linalg.inv(vander).T


@lru_cache(maxsize=None)
def _moment_tables(offsets: tuple, a: float, b: float, k: int) -> np.ndarray:
    """``T[q, m] = int_a^b l_m(x) x^q dx`` for ``q = 0..k``."""
    basis = _basis(offsets)
    p = np.arange(basis.shape[1])
    rows = []
    for q in range(k + 1):
        e = p + q + 1
        rows.append(basis @ ((b ** e - a ** e) / e))
    return np.array(rows)


def _local_integrals(values, parity, a, b, k):
    """``int_{r_i + a h}^{r_i + b h} f(s) (s/h)^k ds / h`` for every node.

    ``f`` is interpolated by degree-6 polynomials; the weight ``s^k`` is
    integrated exactly, so the result is exact for polynomial ``f``.
    """
    n = values.shape[0]
    width = 2 * _HALF + 1
    ext = np.concatenate([parity * values[_HALF - 1::-1], values])
    last = n - _HALF
    centre = np.arange(n) + 0.5
    out = np.empty(n)
    coeff = [comb(k, q) for q in range(k + 1)]

    table = _moment_tables(tuple(range(-_HALF, _HALF + 1)), a, b, k)
    c = centre[:last]
    acc = np.zeros(last)
    for m in range(width):
        w = sum(coeff[q] * c ** (k - q) * table[q, m] for q in range(k + 1))
        acc += w * ext[m:m + last]
    out[:last] = acc
    start = n - width
    for i in range(last, n):
        offsets = tuple(range(start - i, start - i + width))
        table = _moment_tables(offsets, a, b, k)
        w = sum(coeff[q] * centre[i] ** (k - q) * table[q] for q in range(k + 1))
        out[i] = np.dot(w, values[start:start + width])
    return out


def cell_integrals(values: np.ndarray, h: float, parity: int = 1, k: int = 0) -> np.ndarray:
    """``int f(s) s^k ds`` over each cell ``[r_i - h/2, r_i + h/2]``.

    ``parity`` is the parity of ``f`` used for ghosts left of the origin.
    """
    values = np.asarray(values, dtype=float)
    return h ** (k + 1) * _local_integrals(values, parity, -0.5, 0.5, k)


def integrate(values: np.ndarray, h: float, parity: int = 1, k: int = 0) -> float:
    """``int_0^{n h} f(s) s^k ds``."""
    return float(np.sum(cell_integrals(values, h, parity, k)))


def cumulative(values: np.ndarray, h: float, parity: int = 1, k: int = 0) -> np.ndarray:
    """``int_0^{r_i} f(s) s^k ds`` at every node."""
    values = np.asarray(values, dtype=float)
    cells = cell_integrals(values, h, parity, k)
    left_half = h ** (k + 1) * _local_integrals(values, parity, -0.5, 0.0, k)
    before = np.concatenate([[0.0], np.cumsum(cells)[:-1]])
    return before + left_half


def power_tail(r: np.ndarray, f: np.ndarray, r_end: float):
    """Integral of ``f`` from ``r_end`` to infinity under a power-law model.

    The exponent is the log-slope of the last two samples. Returns ``inf``
    if the model is not integrable and 0 if the samples vanish.
    """
    f1, f0 = f[-1], f[-2]
    if f1 == 0.0 or f0 == 0.0 or f1 * f0 < 0:
        return 0.0
    q = -np.log(f1 / f0) / np.log(r[-1] / r[-2])
    if q <= 1.0:
        return np.inf
    return float(f1 * (r_end / r[-1]) ** (-q) * r_end / (q - 1.0))


def inverse_power_fit(r: np.ndarray, rho: np.ndarray, p: float):
    """Fit ``rho ~ c0 r^-p + c1 r^-(p+2)`` to the far end of the samples."""
    n = r.shape[0]
    i1, i0 = n - 1, max(n - 1 - max(n // 8, 1), 0)
    a = np.array([[r[i1] ** -p, r[i1] ** -(p + 2)], [r[i0] ** -p, r[i0] ** -(p + 2)]])
    return np.linalg.solve(a, np.array([rho[i1], rho[i0]]))


def inverse_power_moment(coeffs, p: float, k: int, r_end: float) -> float:
    """Integral of ``s^k (c0 s^-p + c1 s^-(p+2))`` over ``[r_end, inf)``."""
    c0, c1 = coeffs
    if p <= k + 1:
        return np.inf if (c0 != 0.0 or c1 != 0.0) else 0.0
    return float(c0 * r_end ** (k + 1 - p) / (p - k - 1)
                 + c1 * r_end ** (k - 1 - p) / (p + 1 - k))


def volume_integral(values: np.ndarray, h: float, tail: bool = True) -> float:
    """``4 pi int_0^inf f(r) r^2 dr`` for an even profile on a radial grid.

    With ``tail`` the integrand is continued past ``r_max`` by a power law.
    """
    values = np.asarray(values, dtype=float)
    total = integrate(values, h, 1, k=2)
    if tail:
        n = values.shape[0]
        r = (np.arange(n - 2, n) + 0.5) * h
        total += power_tail(r, values[-2:] * r * r, n * h)
    return float(4.0 * np.pi * total)
