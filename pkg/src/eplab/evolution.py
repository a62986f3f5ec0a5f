"""Time integration of the Makino-variable Euler-Poisson system.

Spatial derivatives are 4th-order central differences and time stepping is
classical RK4, with the potential re-solved at every stage. On radial grids
ghost cells at the origin follow parity (``w`` even, ``v`` odd) and ghost
cells beyond ``r_max`` are cubic extrapolations of the current interior
(``far_field="frozen"`` keeps them at the extrapolated initial data). A fourth-difference filter ``-nu d^4 v`` with
``nu = eps_hv h^3 c_max`` damps grid-scale velocity modes; ``w`` is left
unfiltered so that the density stays exactly transported. Negative ``w`` is
clipped after each step and the discarded density is logged.

:func:`picard_solve` realises the fixed-point construction of solutions: each
iterate supplies the density (hence the potential) and the coefficients of a
linear symmetric hyperbolic system whose solution is the next iterate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import TimeSeries, energy_functional, total_mass
from .fluid import EosParams, FluidState, density_from_w
from .grid import BoxGrid, GridFunction, RadialGrid, sample_analytic
from .poisson import (
    DEFAULT_TAIL_EXPONENT,
    radial_gravity,
    solve_poisson_box,
    solve_poisson_radial,
)
from .wsobolev import WeightedNormSpec, l2_delta_norm, weighted_norm

__all__ = [
    "SchemeConfig",
    "NumericalAbort",
    "NonContraction",
    "SimulationResult",
    "Monitor",
    "state_drift",
    "state_norm_l2delta",
    "contraction_rate",
    "PicardConfig",
    "PicardReport",
    "rhs",
    "run_simulation",
    "picard_map",
    "picard_solve",
    "static_state",
    "gaussian_state",
]

log = logging.getLogger(__name__)

_GHOSTS = 2


class NumericalAbort(RuntimeError):
    """The run became non-finite or exceeded the blow-up guard.

    ``partial`` holds the :class:`SimulationResult` recorded up to the abort.
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class NonContraction(RuntimeError):
    """The Picard iteration failed to contract.

    ``report`` holds the last :class:`PicardReport` when one was assembled.
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class SchemeConfig:
    """Time-stepping parameters.

    ``dt`` fixes the step; otherwise each step uses ``cfl h / c_max`` with
    ``c_max = max(|v| + (gamma - 1)/2 w)``. ``cadence`` is the number of steps
    between monitored samples. ``gravity_scale`` multiplies the gravitational
    force (0 gives pure gas dynamics).
    """

    cfl: float = 0.4
    eps_hv: float = 0.25
    t_end: float = 0.5
    cadence: int = 1
    dt: float | None = None
    gravity_scale: float = 1.0
    blowup_factor: float = 1e3
    tail_exponent: float = DEFAULT_TAIL_EXPONENT
    max_steps: int = 1_000_000
    far_field: str = "extrapolate"

    def __post_init__(self):
        if not (0 < self.cfl <= 1.0):
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.eps_hv < 0:
            raise ValueError("eps_hv must be non-negative")
        if not self.t_end >= 0:
            raise ValueError("t_end must be non-negative")
        if int(self.cadence) != self.cadence or self.cadence < 1:
            raise ValueError("cadence must be a positive integer")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.far_field not in ("extrapolate", "frozen"):
            raise ValueError("far_field must be 'extrapolate' or 'frozen'")


# ------------------------------------------------------------ stencils


def _pad_radial(a: np.ndarray, parity: int, right: np.ndarray) -> np.ndarray:
    return np.concatenate([parity * a[_GHOSTS - 1::-1], a, right])


def _d1(ext: np.ndarray, h: float) -> np.ndarray:
    return (ext[:-4] - 8.0 * ext[1:-3] + 8.0 * ext[3:-1] - ext[4:]) / (12.0 * h)


def _d4(ext: np.ndarray) -> np.ndarray:
    return ext[:-4] - 4.0 * ext[1:-3] + 6.0 * ext[2:-2] - 4.0 * ext[3:-1] + ext[4:]


def _extrapolation_weights(degree: int) -> np.ndarray:
    """Weights mapping the last ``degree + 1`` nodes to the two cells beyond."""
    x = np.arange(-degree, 1, dtype=float)
    out = np.empty((2, degree + 1))
    for k, t in enumerate((1.0, 2.0)):
        for j in range(degree + 1):
            others = np.delete(x, j)
            out[k, j] = np.prod((t - others) / (x[j] - others))
    return out


_EXTRAP = _extrapolation_weights(3)


def _far_ghosts(values: np.ndarray) -> np.ndarray:
    """Cubic extrapolation to the two cells past the last node."""
    return _EXTRAP @ values[-_EXTRAP.shape[1]:]


def _box_d1(a: np.ndarray, h: float, axis: int) -> np.ndarray:
    out = np.zeros_like(a)
    v = np.moveaxis(a, axis, 0)
    o = np.moveaxis(out, axis, 0)
    o[2:-2] = (v[:-4] - 8.0 * v[1:-3] + 8.0 * v[3:-1] - v[4:]) / (12.0 * h)
    return out


def _box_d4(a: np.ndarray, axis: int) -> np.ndarray:
    out = np.zeros_like(a)
    v = np.moveaxis(a, axis, 0)
    o = np.moveaxis(out, axis, 0)
    o[2:-2] = v[:-4] - 4.0 * v[1:-3] + 6.0 * v[2:-2] - 4.0 * v[3:-1] + v[4:]
    return out


# ---------------------------------------------------------------- RHS


@dataclass
class _Context:
    """Per-run constants shared by the right-hand-side evaluations."""

    grid: object
    eos: EosParams
    scheme: SchemeConfig
    nu: float
    w_far: np.ndarray | None = None
    v_far: np.ndarray | None = None


def _gravity(w: np.ndarray, ctx: _Context) -> np.ndarray:
    g = ctx.grid
    if ctx.scheme.gravity_scale == 0.0:
        return np.zeros((g.shape[0],) if g.kind == "radial" else (3,) + g.shape)
    rho = density_from_w(w, ctx.eos)
    if g.kind == "radial":
        return ctx.scheme.gravity_scale * radial_gravity(rho, g.h)
    pot = solve_poisson_box(GridFunction(g, rho))
    return ctx.scheme.gravity_scale * pot.grad.samples


def _rhs_arrays(w, v, grav, coeff_w, coeff_v, ctx: _Context):
    """Right-hand side of the linear system with frozen coefficients.

    ``(coeff_w, coeff_v)`` supply the transport velocity and the coupling
    amplitude; the nonlinear system is the case ``coeff = (w, v)``.
    """
    g = ctx.grid
    k = ctx.eos.half_gm1
    h = g.h
    if g.kind == "radial":
        r = g.r
        we = _pad_radial(w, 1, _far_ghosts(w) if ctx.w_far is None else ctx.w_far)
        ve = _pad_radial(v, -1, _far_ghosts(v) if ctx.v_far is None else ctx.v_far)
        wr, vr = _d1(we, h), _d1(ve, h)
        dw = -coeff_v * wr - k * coeff_w * (vr + 2.0 * v / r)
        dv = -coeff_v * vr - k * coeff_w * wr - grav
        if ctx.nu:
            dv = dv - ctx.nu * _d4(ve) / h ** 4
        return dw, dv
    grads_w = [_box_d1(w, h, ax) for ax in range(3)]
    div = sum(_box_d1(v[ax], h, ax) for ax in range(3))
    dw = -sum(coeff_v[ax] * grads_w[ax] for ax in range(3)) - k * coeff_w * div
    dv = np.empty_like(v)
    for c in range(3):
        adv = sum(coeff_v[ax] * _box_d1(v[c], h, ax) for ax in range(3))
        dv[c] = -adv - k * coeff_w * grads_w[c] - grav[c]
        if ctx.nu:
            dv[c] -= ctx.nu * sum(_box_d4(v[c], ax) for ax in range(3)) / h ** 4
    # frozen boundary layer
    for arr in (dw, *dv):
        for ax in range(3):
            idx = [slice(None)] * 3
            for sl in (slice(0, 2), slice(-2, None)):
                idx[ax] = sl
                arr[tuple(idx)] = 0.0
    return dw, dv


def rhs(state: FluidState, eos: EosParams, scheme: SchemeConfig | None = None,
        nu: float = 0.0):
    """Time derivative ``(w_t, v_t)`` of a state under the full system.

    Far-field ghosts on radial grids are extrapolated from the state itself.
    """
    scheme = scheme or SchemeConfig()
    ctx = _make_context(state, eos, scheme, nu=nu)
    w, v = state.w.samples, state.v.samples
    return _rhs_arrays(w, v, _gravity(w, ctx), w, v, ctx)


def _max_speed(w: np.ndarray, v: np.ndarray, eos: EosParams) -> float:
    speed = np.abs(v) if v.ndim == w.ndim else np.sqrt(np.sum(v * v, axis=0))
    return float(np.max(speed + eos.half_gm1 * np.abs(w)))


def _make_context(state: FluidState, eos: EosParams, scheme: SchemeConfig,
                  nu: float | None = None) -> _Context:
    g = state.geometry
    c0 = _max_speed(state.w.samples, state.v.samples, eos)
    if nu is None:
        nu = scheme.eps_hv * g.h ** 3 * c0
    ctx = _Context(g, eos, scheme, nu)
    if g.kind == "radial" and scheme.far_field == "frozen":
        ctx.w_far = _far_ghosts(state.w.samples)
        ctx.v_far = _far_ghosts(state.v.samples)
    return ctx


def _cell_volumes(grid) -> np.ndarray:
    if grid.kind == "radial":
        return 4.0 * np.pi * grid.r ** 2 * grid.h
    return np.full(grid.shape, grid.h ** 3)


def _clip(w: np.ndarray, eos: EosParams, volumes: np.ndarray):
    neg = w < 0
    if not np.any(neg):
        return w, 0.0
    clip_mass = float(np.sum(density_from_w(-w[neg], eos) * volumes[neg]))
    return np.where(neg, 0.0, w), clip_mass


def _rk4(w, v, dt, ctx, coeffs=None):
    """One RK4 step. ``coeffs`` gives frozen (w, v, gravity) at t, t+dt/2, t+dt."""
    def stage(wa, va, which):
        if coeffs is None:
            return _rhs_arrays(wa, va, _gravity(wa, ctx), wa, va, ctx)
        cw, cv, cg = coeffs[which]
        return _rhs_arrays(wa, va, cg, cw, cv, ctx)

    k1w, k1v = stage(w, v, 0)
    k2w, k2v = stage(w + 0.5 * dt * k1w, v + 0.5 * dt * k1v, 1)
    k3w, k3v = stage(w + 0.5 * dt * k2w, v + 0.5 * dt * k2v, 1)
    k4w, k4v = stage(w + dt * k3w, v + dt * k3v, 2)
    w_new = w + dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
    v_new = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return w_new, v_new


# ---------------------------------------------------------- monitoring


@dataclass(frozen=True)
class Monitor:
    """What to record at each sample.

    ``norms`` enables the H_{s,delta} norms of ``w`` and ``v``; ``reference``
    is a state against which the relative L^2_delta drift is measured.
    """

    spec: WeightedNormSpec = WeightedNormSpec(2.6, -1.2)
    norms: bool = True
    reference: FluidState | None = None
    source_norm: bool = False


def _record(series: TimeSeries, state: FluidState, eos: EosParams, monitor: Monitor,
            clip_mass: float, scheme: SchemeConfig, result=None) -> None:
    g = state.geometry
    rho = GridFunction(g, density_from_w(state.w.samples, eos))
    if g.kind == "radial":
        pot = solve_poisson_radial(rho, scheme.tail_exponent)
    else:
        pot = solve_poisson_box(rho)
    values = dict(
        t=state.t,
        mass=total_mass(rho),
        energy=energy_functional(rho, state.v, pot, eos),
        min_w=float(np.min(state.w.samples)),
        max_w=float(np.max(state.w.samples)),
        norm_w_l2delta=l2_delta_norm(state.w, monitor.spec.delta),
        clip_mass=clip_mass,
    )
    if monitor.norms:
        values["norm_w_s_delta"] = weighted_norm(state.w, monitor.spec).norm
        values["norm_v_s_delta"] = weighted_norm(state.v, monitor.spec).norm
    if monitor.reference is not None:
        values["static_drift_l2delta"] = state_drift(state, monitor.reference,
                                                     monitor.spec.delta)
    series.append(**values)
    if monitor.source_norm and result is not None:
        force = pot.grad * scheme.gravity_scale
        result.source_norms.append(weighted_norm(force, monitor.spec).norm)


def state_norm_l2delta(state: FluidState, delta: float, tail: bool = True) -> float:
    return float(np.hypot(l2_delta_norm(state.w, delta, tail),
                          l2_delta_norm(state.v, delta, tail=False)))


def state_drift(state: FluidState, reference: FluidState, delta: float) -> float:
    """``||U - U_ref||_{L^2_delta} / ||U_ref||_{L^2_delta}``."""
    dw = state.w - reference.w
    dv = state.v - reference.v
    num = np.hypot(l2_delta_norm(dw, delta, tail=False), l2_delta_norm(dv, delta, tail=False))
    den = state_norm_l2delta(reference, delta)
    return float(num / den)


@dataclass
class SimulationResult:
    """Final state, monitored series and per-step clipping record."""

    final: FluidState
    series: TimeSeries
    steps: int
    clip_per_step: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    source_norms: list = field(default_factory=list)


def run_simulation(initial: FluidState, eos: EosParams, scheme: SchemeConfig,
                   monitor: Monitor | None = None, keep_snapshots: bool = False,
                   nu: float | None = None) -> SimulationResult:
    """Integrate from ``initial.t`` to ``scheme.t_end``.

    Raises :class:`NumericalAbort` if the state becomes non-finite or the
    maximal characteristic speed exceeds ``blowup_factor`` times its initial
    value.
    """
    monitor = monitor or Monitor()
    ctx = _make_context(initial, eos, scheme, nu)
    g = initial.geometry
    volumes = _cell_volumes(g)
    w, v, t = initial.w.samples.copy(), initial.v.samples.copy(), initial.t
    c0 = max(_max_speed(w, v, eos), 1e-300)
    series = TimeSeries()
    result = SimulationResult(initial, series, 0)
    _record(series, initial, eos, monitor, 0.0, scheme, result)
    if keep_snapshots:
        result.snapshots.append(initial)
    step = 0
    while t < scheme.t_end * (1 - 1e-14):
        if step >= scheme.max_steps:
            raise NumericalAbort(f"step limit {scheme.max_steps} reached at t={t:.6g}", result)
        c = _max_speed(w, v, eos)
        dt = scheme.dt if scheme.dt is not None else scheme.cfl * g.h / max(c, 1e-300)
        dt = min(dt, scheme.t_end - t)
        w, v = _rk4(w, v, dt, ctx)
        t += dt
        step += 1
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
            raise NumericalAbort(f"non-finite state at t={t:.6g} (step {step})", result)
        w, clipped = _clip(w, eos, volumes)
        result.clip_per_step.append(clipped)
        if clipped:
            log.info("step %d: clipped density mass %.3e", step, clipped)
        if _max_speed(w, v, eos) > scheme.blowup_factor * c0:
            raise NumericalAbort(f"characteristic speed grew beyond "
                                 f"{scheme.blowup_factor:g}x its initial value at t={t:.6g}",
                                 result)
        state = FluidState(initial.w.with_samples(w), initial.v.with_samples(v), t)
        done = t >= scheme.t_end * (1 - 1e-14)
        if step % scheme.cadence == 0 or done:
            _record(series, state, eos, monitor, clipped, scheme, result)
        if keep_snapshots:
            result.snapshots.append(state)
    result.final = FluidState(initial.w.with_samples(w), initial.v.with_samples(v), t)
    result.steps = step
    return result


# ---------------------------------------------------------- initial data


def static_state(grid, a: float = 1.0) -> FluidState:
    """The static gamma = 6/5 profile at rest."""
    from .fluid import static_profile

    prof = static_profile(a)
    if grid.kind == "radial":
        w = sample_analytic(prof.w, grid)
        v = GridFunction(grid, np.zeros(grid.shape), "radial-vector")
    else:
        r = grid.radius()
        w = GridFunction(grid, prof.w(r))
        v = GridFunction(grid, np.zeros((3,) + grid.shape), "vector")
    return FluidState(w, v, 0.0)


def gaussian_state(grid, eos: EosParams, amplitude: float = 1.0, width: float = 2.0,
                   velocity: float = 0.0) -> FluidState:
    """Gaussian density ``amplitude exp(-r^2 / (2 width^2))``.

    The velocity is ``velocity * r exp(-r^2 / (2 width^2)) x / r`` (radial).
    """
    def rho(r):
        return amplitude * np.exp(-r * r / (2.0 * width ** 2))

    def speed(r):
        return velocity * r * np.exp(-r * r / (2.0 * width ** 2))

    if grid.kind == "radial":
        r = grid.r
        w = GridFunction(grid, eos.makino_coeff * rho(r) ** eos.half_gm1)
        v = GridFunction(grid, speed(r), "radial-vector")
    else:
        x, y, z = grid.mesh()
        r = np.sqrt(x * x + y * y + z * z)
        w = GridFunction(grid, eos.makino_coeff * rho(r) ** eos.half_gm1)
        unit = np.where(r > 0, speed(r) / np.where(r > 0, r, 1.0), 0.0)
        v = GridFunction(grid, np.stack([unit * x, unit * y, unit * z]), "vector")
    return FluidState(w, v, 0.0)


# --------------------------------------------------------------- Picard


@dataclass(frozen=True)
class PicardConfig:
    """Fixed-point iteration parameters.

    ``tol`` is relative to the L^2_delta norm of the initial data. The
    high-norm bound is ``bound_factor * M0`` with ``M0`` the H_{s,delta}
    norm of the initial data unless given. On a self-map failure ``T`` is
    halved, at most ``max_halvings`` times.
    """

    T: float
    tol: float = 1e-8
    max_iter: int = 40
    spec: WeightedNormSpec = WeightedNormSpec(2.6, -1.2)
    bound_factor: float = 2.0
    M0: float | None = None
    max_halvings: int = 6
    norm_stride: int = 1

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")


@dataclass
class PicardReport:
    """Outcome of :func:`picard_solve`.

    ``gaps[k]`` is ``sup_t ||U^{k+1}(t) - U^k(t)||_{L^2_delta}``, absolute.
    ``contraction_estimate`` is the geometric rate fitted to the gaps.
    """

    times: np.ndarray
    w: np.ndarray
    v: np.ndarray
    gaps: list
    high_norms: list
    contraction_estimate: float
    converged: bool
    T: float
    halvings: int
    M0: float
    scale: float

    def state(self, index: int, like: FluidState) -> FluidState:
        return FluidState(like.w.with_samples(self.w[index]),
                          like.v.with_samples(self.v[index]), float(self.times[index]))


def picard_map(w_in: np.ndarray, v_in: np.ndarray, initial: FluidState, eos: EosParams,
               dt: float, scheme: SchemeConfig, nu: float) -> tuple:
    """Apply the fixed-point map to a sampled trajectory.

    ``w_in``, ``v_in`` hold the input trajectory at times ``k dt``. Its
    density determines the potential, and its values are the (linearly
    interpolated) coefficients of the linear system solved with RK4 from the
    initial data.
    """
    ctx = _make_context(initial, eos, scheme, nu)
    grav = [_gravity(w_in[k], ctx) for k in range(w_in.shape[0])]
    w_out = np.empty_like(w_in)
    v_out = np.empty_like(v_in)
    w, v = initial.w.samples.copy(), initial.v.samples.copy()
    w_out[0], v_out[0] = w, v
    for k in range(w_in.shape[0] - 1):
        coeffs = (
            (w_in[k], v_in[k], grav[k]),
            (0.5 * (w_in[k] + w_in[k + 1]), 0.5 * (v_in[k] + v_in[k + 1]),
             0.5 * (grav[k] + grav[k + 1])),
            (w_in[k + 1], v_in[k + 1], grav[k + 1]),
        )
        w, v = _rk4(w, v, dt, ctx, coeffs)
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
            raise NumericalAbort("non-finite iterate in the linear solve")
        w_out[k + 1], v_out[k + 1] = w, v
    return w_out, v_out


def _time_grid(initial: FluidState, eos: EosParams, scheme: SchemeConfig, T: float):
    c0 = max(_max_speed(initial.w.samples, initial.v.samples, eos), 1e-300)
    dt0 = scheme.dt if scheme.dt is not None else scheme.cfl * initial.geometry.h / c0
    steps = max(int(math.ceil(T / dt0 - 1e-9)), 1)
    return steps, T / steps


def _slice_norm(w, v, like: FluidState, spec: WeightedNormSpec) -> float:
    wf = like.w.with_samples(w)
    vf = like.v.with_samples(v)
    return float(np.hypot(weighted_norm(wf, spec).norm, weighted_norm(vf, spec).norm))


def _low_gap(w1, v1, w0, v0, like: FluidState, delta: float) -> float:
    gaps = [np.hypot(l2_delta_norm(like.w.with_samples(w1[k] - w0[k]), delta, tail=False),
                     l2_delta_norm(like.v.with_samples(v1[k] - v0[k]), delta, tail=False))
            for k in range(w1.shape[0])]
    return float(max(gaps))


def contraction_rate(gaps, floor: float = 0.0) -> float:
    """Geometric rate from a log-linear fit of the gaps above ``floor``."""
    g = np.asarray([x for x in gaps if x > floor], dtype=float)
    if g.size < 2:
        return 0.0
    k = np.arange(g.size)
    slope = np.polyfit(k, np.log(g), 1)[0]
    return float(np.exp(slope))


def picard_solve(initial: FluidState, eos: EosParams, cfg: PicardConfig,
                 scheme: SchemeConfig | None = None) -> PicardReport:
    """Iterate the fixed-point map to convergence on ``[0, T]``.

    Starts from the time-constant extension of the initial data. If an
    iterate leaves the high-norm ball of radius ``bound_factor * M0`` the
    horizon is halved and the iteration restarts. Raises
    :class:`NonContraction` if the gaps stop decreasing or ``max_iter`` is
    exhausted.
    """
    scheme = scheme or SchemeConfig()
    spec = cfg.spec
    m0 = cfg.M0 if cfg.M0 is not None else _slice_norm(
        initial.w.samples, initial.v.samples, initial, spec)
    scale = state_norm_l2delta(initial, spec.delta, tail=False)
    threshold = cfg.tol * scale if scale > 0 else cfg.tol
    nu = scheme.eps_hv * initial.geometry.h ** 3 * _max_speed(
        initial.w.samples, initial.v.samples, eos)
    T = cfg.T
    for halving in range(cfg.max_halvings + 1):
        steps, dt = _time_grid(initial, eos, scheme, T)
        times = np.arange(steps + 1) * dt
        w_cur = np.repeat(initial.w.samples[None], steps + 1, axis=0)
        v_cur = np.repeat(initial.v.samples[None], steps + 1, axis=0)
        gaps, highs = [], []
        left_ball = False
        converged = False
        for _ in range(cfg.max_iter):
            w_new, v_new = picard_map(w_cur, v_cur, initial, eos, dt, scheme, nu)
            gaps.append(_low_gap(w_new, v_new, w_cur, v_cur, initial, spec.delta))
            idx = range(0, steps + 1, max(cfg.norm_stride, 1))
            highs.append(max(_slice_norm(w_new[k], v_new[k], initial, spec) for k in idx))
            w_cur, v_cur = w_new, v_new
            if highs[-1] > cfg.bound_factor * m0:
                left_ball = True
                break
            if gaps[-1] <= threshold:
                converged = True
                break
            if len(gaps) >= 4 and gaps[-1] >= gaps[-2] >= gaps[-3]:
                break
        rate = contraction_rate(gaps, floor=1e-3 * threshold)
        if left_ball:
            log.warning("iterate left the ball of radius %.3g at T=%.4g; halving T",
                        cfg.bound_factor * m0, T)
            T *= 0.5
            continue
        report = PicardReport(times, w_cur, v_cur, gaps, highs, rate, converged, T,
                              halving, m0, scale)
        if not converged:
            raise NonContraction(
                f"Picard gaps did not reach {threshold:.3e} in {len(gaps)} iterations "
                f"(last gap {gaps[-1]:.3e}, rate {rate:.3f})", report)
        return report
    raise NonContraction(f"iterates left the bound {cfg.bound_factor} M0 after "
                         f"{cfg.max_halvings} halvings of T")
