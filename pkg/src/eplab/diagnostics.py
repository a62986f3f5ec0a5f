"""Conserved quantities, monitored time series and Gronwall-type fits."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import _quadrature as quad
from .fluid import EosParams
from .grid import GridFunction
from .poisson import PotentialField

__all__ = [
    "COLUMNS",
    "TimeSeries",
    "GronwallFit",
    "total_mass",
    "energy_functional",
    "gravitational_energy_direct",
    "gronwall_fit",
    "energy_rate_constant",
    "cumulative_trapezoid",
]

COLUMNS = (
    "t",
    "mass",
    "energy",
    "min_w",
    "max_w",
    "norm_w_s_delta",
    "norm_v_s_delta",
    "norm_w_l2delta",
    "static_drift_l2delta",
    "clip_mass",
)


def _integral(values: np.ndarray, grid, tail: bool = True) -> float:
    if grid.kind == "radial":
        return quad.volume_integral(values, grid.h, tail)
    return float(np.sum(values) * grid.h ** 3)


def total_mass(rho: GridFunction, tail: bool = True) -> float:
    """``int rho dx``; radial grids add the power-law tail beyond ``r_max``."""
    if rho.rank != "scalar":
        raise ValueError("density must be a scalar field")
    return _integral(rho.samples, rho.geometry, tail)


def _speed_squared(v: GridFunction) -> np.ndarray:
    return v.samples ** 2 if v.rank != "vector" else np.sum(v.samples ** 2, axis=0)


def energy_functional(rho: GridFunction, v: GridFunction, potential: PotentialField,
                      eos: EosParams) -> float:
    """Kinetic plus internal plus gravitational energy.

    ``int (rho |v|^2 / 2 + K rho^gamma / (gamma - 1)) dx + (1/2) int rho phi dx``.
    On radial grids the internal and gravitational terms carry the
    power-law tail beyond ``r_max``; the kinetic term is integrated over
    the grid only, since the velocity has no far-field model.
    """
    g = rho.geometry
    kinetic = _integral(0.5 * rho.samples * _speed_squared(v), g, tail=False)
    internal = _integral(eos.K * rho.samples ** eos.gamma / (eos.gamma - 1.0), g)
    gravity = _integral(0.5 * rho.samples * potential.phi.samples, g)
    return kinetic + internal + gravity


def gravitational_energy_direct(rho: GridFunction) -> float:
    """``-(1/2) int int rho(x) rho(y) / |x - y|`` by direct double quadrature.

    For radial densities the angular integrals reduce ``1/|x - y|`` to
    ``1 / max(r, r')``, leaving a 2D midpoint sum that is independent of the
    Poisson solver.
    """
    g = rho.geometry
    if g.kind != "radial":
        raise ValueError("direct double quadrature is implemented for radial densities")
    r = g.r
    shell = 4.0 * np.pi * r * r * rho.samples * g.h
    kernel = 1.0 / np.maximum(r[:, None], r[None, :])
    return float(-0.5 * shell @ kernel @ shell)


@dataclass
class TimeSeries:
    """Rows of monitored quantities sampled during a run."""

    rows: list = field(default_factory=list)

    def append(self, **values) -> None:
        unknown = set(values) - set(COLUMNS)
        if unknown:
            raise KeyError(f"unknown columns {sorted(unknown)}")
        self.rows.append({c: float(values.get(c, np.nan)) for c in COLUMNS})

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(COLUMNS)
            for row in self.rows:
                writer.writerow([f"{row[c]:.17g}" for c in COLUMNS])

    @classmethod
    def from_csv(cls, path) -> "TimeSeries":
        series = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                series.append(**{k: float(v) for k, v in row.items()})
        return series


@dataclass(frozen=True)
class GronwallFit:
    """Fitted constants of the energy-estimate envelopes.

    ``c1`` is the smallest constant with
    ``N(t) <= exp(C1 t) (M0^2 + int_0^t ||F||^2)`` at every sample (clamped at
    0); ``c1_ls`` is the least-squares growth rate of the log-ratio through
    the origin and ``residual`` the RMS misfit of the log-ratio against
    ``c1 t``. ``c2`` is the smallest constant with
    ``||U1 - U2||^2(t) <= exp(C2 t) int_0^t ||F1 - F2||^2`` when a pair of
    runs is supplied, else 0. ``skipped`` marks a degenerate (zero) series.
    """

    c1: float
    c2: float
    c1_ls: float
    residual: float
    skipped: bool = False

    def envelope(self, t, m0_sq, source_integral=0.0):
        t = np.asarray(t, dtype=float)
        return (m0_sq + np.asarray(source_integral, dtype=float)) * np.exp(self.c1 * t)


def cumulative_trapezoid(t, f) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    steps = 0.5 * (f[1:] + f[:-1]) * np.diff(t)
    return np.concatenate([[0.0], np.cumsum(steps)])


def gronwall_fit(t, n_sq, source_sq=None, m0_sq: float | None = None,
                 diff_sq=None, diff_source_sq=None, min_samples: int = 10) -> GronwallFit:
    """Fit Gronwall constants to monitored squared norms.

    ``n_sq`` is ``||U(t)||_{s,delta}^2`` and ``source_sq`` the squared norm
    of the source ``F(t)`` at the same samples; ``m0_sq`` defaults to
    ``n_sq[0]``. ``diff_sq`` and ``diff_source_sq`` are the squared low-norm
    distances between two runs and between their sources.
    """
    t = np.asarray(t, dtype=float)
    n_sq = np.asarray(n_sq, dtype=float)
    if t.shape != n_sq.shape:
        raise ValueError("time and norm samples must match")
    if t.size < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {t.size}")
    if np.any(np.diff(t) <= 0):
        raise ValueError("sample times must increase strictly")
    if not np.any(n_sq):
        return GronwallFit(0.0, 0.0, 0.0, 0.0, skipped=True)
    m0_sq = float(n_sq[0]) if m0_sq is None else float(m0_sq)
    src = np.zeros_like(t) if source_sq is None else cumulative_trapezoid(t, source_sq)
    later = t > t[0]
    tau = t[later] - t[0]
    y = np.log(n_sq[later] / (m0_sq + src[later]))
    c1 = max(float(np.max(y / tau)), 0.0)
    c1_ls = float(np.sum(tau * y) / np.sum(tau * tau))
    residual = float(np.sqrt(np.mean((y - c1 * tau) ** 2)))
    c2 = 0.0
    if diff_sq is not None and diff_source_sq is not None:
        dsrc = cumulative_trapezoid(t, diff_source_sq)[later]
        dd = np.asarray(diff_sq, dtype=float)[later]
        ok = (dsrc > 0) & (dd > 0)
        if np.any(ok):
            c2 = max(float(np.max(np.log(dd[ok] / dsrc[ok]) / tau[ok])), 0.0)
    return GronwallFit(c1, c2, c1_ls, residual)


def energy_rate_constant(t, n_sq, source_sq) -> float:
    """Smallest ``C`` with ``dN/dt <= C (N + ||F||^2)`` between samples."""
    t = np.asarray(t, dtype=float)
    n_sq = np.asarray(n_sq, dtype=float)
    f = np.asarray(source_sq, dtype=float)
    rate = np.diff(n_sq) / np.diff(t)
    mid = 0.5 * (n_sq[1:] + n_sq[:-1] + f[1:] + f[:-1])
    return float(max(np.max(rate / mid), 0.0))
