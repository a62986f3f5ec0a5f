"""Empirical checks of the weighted-space estimates on a test corpus.

Each inequality family is evaluated by computing both sides with the norm
engine of :mod:`eplab.wsobolev` on every corpus member (or pair / tuple of
members), over a family of dilations ``u(lambda x)``. The estimates assert
a constant independent of ``u``; on a finite corpus the harness can only
certify that the observed ratios are finite and stay within a band across
dilations, so that is what ``RatioReport.passed`` means.

Hypotheses are checked strictly: a parameter set outside a family's stated
range raises :class:`HypothesisError` naming the violated bound instead of
extrapolating.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import sympy as sp
from scipy import integrate

from .grid import (
    CartesianField,
    GridFunction,
    RadialField,
    RadialGrid,
    box_sampler,
    derivative,
    radial_interpolant,
    sample_analytic,
)
from .poisson import elliptic_estimate_report, solve_poisson_radial
from .wsobolev import NormBreakdown, WeightedNormSpec, weighted_norm

__all__ = [
    "InequalityKind",
    "IneqParams",
    "HypothesisError",
    "CorpusFunction",
    "RatioCase",
    "RatioReport",
    "default_corpus",
    "corpus_from_grid",
    "hypothesis_violations",
    "multiplication_admissible",
    "product_admissible",
    "moser_constant",
    "difference_terms",
    "check_inequality",
]


class InequalityKind(str, enum.Enum):
    MULTIPLICATION = "multiplication"
    PRODUCT = "product"
    POWER = "power"
    POWER_MASS = "power-mass"
    DIFFERENCE = "difference"
    EMBEDDING = "embedding"
    DERIVATIVE = "derivative"
    MOSER = "moser"
    KATEB = "kateb"
    INTERMEDIATE = "intermediate"
    L1_EMBEDDING = "l1-embedding"
    ELLIPTIC = "elliptic"


class HypothesisError(ValueError):
    """Parameters lie outside the stated range of an estimate."""


@dataclass(frozen=True)
class IneqParams:
    """Parameters shared by all inequality families.

    ``beta`` defaults to ``2 / (gamma - 1)``. ``sup_weight`` is the weight of
    the sup norm in the embedding family (default ``delta + 3/2``).
    ``mass_weight`` is the target weight of the power-mass family (default
    the largest admissible value ``[beta] delta + 3([beta] - 1)/2``).
    ``kateb_exponent`` defaults to ``beta``; ``s_prime`` to ``s + 1``.
    """

    s: float = 2.6
    delta: float = -1.2
    gamma: float = 1.2
    beta: float | None = None
    j_max: int = 10
    shell_n: int = 64
    dilations: tuple = (0.5, 1.0, 2.0)
    amplitudes: tuple = (0.5, 1.0, 2.0, 4.0)
    sup_weight: float | None = None
    l1_weight: float = 2.0
    s_prime: float | None = None
    kateb_exponent: float | None = None
    mass_weight: float | None = None
    product_orders: tuple = (2, 3)
    moser_functions: tuple = ("rational", "sine")
    dilation_tol: float = 10.0
    intermediate_tol: float = 1e-3
    elliptic_n: int = 4096
    elliptic_r_max: float = 64.0

    def __post_init__(self):
        if self.beta is None and not self.gamma > 1.0:
            raise ValueError("gamma must exceed 1")
        if 1.0 not in self.dilations:
            raise ValueError("the dilation family must contain 1")
        if 1.0 not in self.amplitudes:
            raise ValueError("the amplitude family must contain 1")

    @property
    def power(self) -> float:
        return 2.0 / (self.gamma - 1.0) if self.beta is None else float(self.beta)

    @property
    def power_floor(self) -> int:
        return int(math.floor(self.power + 1e-12))

    @property
    def power_is_integer(self) -> bool:
        return abs(self.power - round(self.power)) < 1e-12

    @property
    def embedding_weight(self) -> float:
        return self.delta + 1.5 if self.sup_weight is None else self.sup_weight

    @property
    def upper_order(self) -> float:
        return self.s + 1.0 if self.s_prime is None else self.s_prime

    @property
    def kateb_power(self) -> float:
        return self.power if self.kateb_exponent is None else self.kateb_exponent

    @property
    def mass_target(self) -> float:
        if self.mass_weight is not None:
            return self.mass_weight
        b = self.power_floor
        return b * self.delta + 1.5 * (b - 1)

    def spec(self, s: float, delta: float) -> WeightedNormSpec:
        return WeightedNormSpec(s, delta, j_max=self.j_max, shell_n=self.shell_n)


# ----------------------------------------------------------- hypotheses


def multiplication_admissible(s, s1, s2, delta, delta1, delta2) -> list:
    """Violated bounds of ``||uv||_{s,delta} <= C ||u||_{s1,delta1} ||v||_{s2,delta2}``."""
    out = []
    if not s <= min(s1, s2):
        out.append(f"s <= min(s1, s2) violated: {s} > {min(s1, s2)}")
    if not s + 1.5 < s1 + s2:
        out.append(f"s + 3/2 < s1 + s2 violated: {s + 1.5} >= {s1 + s2}")
    if not 0.0 <= s1 + s2:
        out.append(f"0 <= s1 + s2 violated: {s1 + s2}")
    if not delta - 1.5 <= delta1 + delta2 + 1e-12:
        out.append(f"delta - 3/2 <= delta1 + delta2 violated: {delta - 1.5} > {delta1 + delta2}")
    return out


def product_admissible(s, delta, deltas) -> list:
    """Violated bounds of ``||u_1...u_m||_{s,delta} <= C prod ||u_i||_{s,delta_i}``."""
    m = len(deltas)
    out = []
    if m < 2:
        out.append("at least two factors are needed")
    if not s > 1.5:
        out.append(f"s > 3/2 violated: s = {s}")
    bound = sum(deltas) + 1.5 * (m - 1)
    if not delta <= bound + 1e-12:
        out.append(f"delta <= delta_1 + ... + delta_m + 3(m-1)/2 = {bound} violated: delta = {delta}")
    return out


def _power_violations(p: IneqParams) -> list:
    b, s, d = p.power, p.s, p.delta
    out = []
    if not b >= 2.0:
        out.append(f"beta >= 2 violated: beta = {b}")
        return out
    if p.power_is_integer:
        if not s > 1.5:
            out.append(f"s > 3/2 violated: s = {s}")
        bound = 2.0 / (b - 1.0) - 1.5
    else:
        fb = p.power_floor
        top = b - fb + 2.5
        if not 2.5 < s < top:
            out.append(f"5/2 < s < beta - [beta] + 5/2 = {top} violated: s = {s}")
        bound = 2.0 / (fb - 1.0) - 1.5
    if not d >= bound - 1e-12:
        out.append(f"delta >= 2/([beta]-1) - 3/2 = {bound} violated: delta = {d}")
    return out


def _power_mass_violations(p: IneqParams) -> list:
    b, s, d = p.power, p.s, p.delta
    out = []
    if not b >= 2.0:
        return [f"beta >= 2 violated: beta = {b}"]
    fb = p.power_floor
    if p.power_is_integer:
        if not s > 2.5:
            out.append(f"s > 5/2 violated: s = {s}")
    else:
        top = 2.5 + b - fb
        if not 2.5 < s < top:
            out.append(f"5/2 < s < 5/2 + beta - [beta] = {top} violated: s = {s}")
    bound = 3.0 / fb - 1.5
    if not d > bound + 1e-12:
        out.append(f"delta > 3/[beta] - 3/2 = {bound} violated (strict): delta = {d}")
    target = p.mass_target
    top_w = fb * d + 1.5 * (fb - 1)
    if not target > 1.5 + 1e-12:
        out.append(f"target weight delta' > 3/2 violated: delta' = {target}")
    if not target <= top_w + 1e-12:
        out.append(f"delta' <= [beta] delta + 3([beta]-1)/2 = {top_w} violated: delta' = {target}")
    return out


def hypothesis_violations(kind, params: IneqParams) -> list:
    """List of violated hypotheses of ``kind`` at ``params`` (empty if admissible)."""
    kind = InequalityKind(kind)
    p = params
    s, d = p.s, p.delta
    if kind is InequalityKind.MULTIPLICATION:
        return multiplication_admissible(s, s, s, 2 * d + 1.5, d, d)
    if kind is InequalityKind.PRODUCT:
        out = []
        for m in p.product_orders:
            out += product_admissible(s, m * d + 1.5 * (m - 1), [d] * m)
        return out
    if kind is InequalityKind.POWER:
        return _power_violations(p)
    if kind is InequalityKind.POWER_MASS:
        return _power_mass_violations(p)
    if kind is InequalityKind.DIFFERENCE:
        return [f"{msg} (difference estimate inherits the power hypotheses)"
                for msg in _power_violations(p)]
    if kind is InequalityKind.EMBEDDING:
        out = []
        if not s > 1.5:
            out.append(f"s > 3/2 violated: s = {s}")
        if not p.embedding_weight <= d + 1.5 + 1e-12:
            out.append(f"sup weight <= delta + 3/2 = {d + 1.5} violated: "
                       f"weight = {p.embedding_weight}")
        return out
    if kind is InequalityKind.DERIVATIVE:
        return [] if s >= 1.0 else [f"s >= 1 needed for a non-negative order s - 1: s = {s}"]
    if kind is InequalityKind.MOSER:
        return [] if s >= 0 else [f"s >= 0 violated: s = {s}"]
    if kind is InequalityKind.KATEB:
        out = []
        k = p.kateb_power
        if not k > 1.0:
            out.append(f"exponent > 1 violated: exponent = {k}")
        if not 0.0 < s < k + 0.5:
            out.append(f"0 < s < exponent + 1/2 = {k + 0.5} violated: s = {s}")
        return out
    if kind is InequalityKind.INTERMEDIATE:
        if not 0.0 < s < p.upper_order:
            return [f"0 < s < s' = {p.upper_order} violated: s = {s}"]
        return []
    if kind is InequalityKind.L1_EMBEDDING:
        if not p.l1_weight > 1.5:
            return [f"weight > 3/2 violated: weight = {p.l1_weight}"]
        return []
    if kind is InequalityKind.ELLIPTIC:
        out = []
        if not -1.5 < d < -0.5:
            out.append(f"-3/2 < delta < -1/2 violated: delta = {d}")
        if not s >= 2.0:
            out.append(f"s >= 2 needed for a non-negative source order s - 2: s = {s}")
        return out
    raise ValueError(f"unhandled kind {kind}")


# --------------------------------------------------------------- corpus


@dataclass(frozen=True)
class CorpusFunction:
    """A test function with value and gradient evaluators.

    Radial members evaluate ``value(r)`` and ``gradient(r) = d value / dr``;
    Cartesian members evaluate ``value(x, y, z)`` and ``gradient(x, y, z)``
    with shape ``(3, ...)``. ``decay`` is the power-law decay rate at
    infinity (``inf`` for faster than any power) and ``bounds`` the
    integration box of Cartesian members, ``((lo, hi),) * 3``, or the
    quadrature cutoff radius of radial members.
    """

    name: str
    value: Callable
    gradient: Callable
    radial: bool
    decay: float = np.inf
    bounds: object = None

    def __call__(self, x, y, z):
        with np.errstate(all="ignore"):
            if self.radial:
                return np.asarray(self.value(np.sqrt(x * x + y * y + z * z)), dtype=float)
            return np.asarray(self.value(x, y, z), dtype=float)

    def profile(self, r):
        with np.errstate(all="ignore"):
            return np.asarray(self.value(np.abs(np.asarray(r, dtype=float))), dtype=float)

    def field(self):
        if self.radial:
            return RadialField(self.profile, "scalar", self.name)
        return CartesianField(self.__call__, "scalar", self.name)

    def dilated(self, lam: float) -> "CorpusFunction":
        """``u(lam x)``."""
        if lam == 1.0:
            return self
        val, grad = self.value, self.gradient
        if self.radial:
            bounds = None if self.bounds is None else self.bounds / lam
            return replace(self, name=f"{self.name}@{lam:g}", bounds=bounds,
                           value=lambda r: val(lam * r),
                           gradient=lambda r: lam * np.asarray(grad(lam * r)))
        bounds = tuple((lo / lam, hi / lam) for lo, hi in self.bounds)
        return replace(self, name=f"{self.name}@{lam:g}", bounds=bounds,
                       value=lambda x, y, z: val(lam * x, lam * y, lam * z),
                       gradient=lambda x, y, z: lam * np.asarray(grad(lam * x, lam * y, lam * z)))

    def scaled(self, a: float) -> "CorpusFunction":
        """``a u``."""
        if a == 1.0:
            return self
        val, grad = self.value, self.gradient
        if self.radial:
            return replace(self, name=f"{a:g}*{self.name}", value=lambda r: a * val(r),
                           gradient=lambda r: a * np.asarray(grad(r)))
        return replace(self, name=f"{a:g}*{self.name}",
                       value=lambda x, y, z: a * val(x, y, z),
                       gradient=lambda x, y, z: a * np.asarray(grad(x, y, z)))


def _lambdify_radial(expr, r):
    f = sp.lambdify(r, expr, "numpy")

    def evaluate(rr):
        with np.errstate(all="ignore"):
            out = np.asarray(f(rr), dtype=float)
        return np.broadcast_to(out, np.shape(rr)).copy()

    return evaluate


def _lambdify_cartesian(expr, xyz):
    f = sp.lambdify(xyz, expr, "numpy")

    def evaluate(x, y, z):
        with np.errstate(all="ignore"):
            out = np.asarray(f(x, y, z), dtype=float)
        return np.broadcast_to(out, np.broadcast(x, y, z).shape).copy()

    return evaluate


def _radial_member(name, expr, r, decay, cutoff):
    return CorpusFunction(name, _lambdify_radial(expr, r),
                          _lambdify_radial(sp.diff(expr, r), r), True, decay, float(cutoff))


def _cartesian_member(name, expr, xyz, bounds):
    value = _lambdify_cartesian(expr, xyz)
    parts = [_lambdify_cartesian(sp.diff(expr, v), xyz) for v in xyz]
    return CorpusFunction(name, value,
                          lambda x, y, z: np.stack([g(x, y, z) for g in parts]),
                          False, np.inf, tuple(bounds))


def default_corpus() -> list:
    """Ten closed-form nonnegative test functions spanning several decay regimes.

    Three centred Gaussians (widths 1/2, 1, 2), the algebraic profiles
    ``(1 + r^2)^{-p}`` for ``p`` in {1/4, 1, 5/2}, a centred bump of radius
    3/2, an off-centre bump and two anisotropic Gaussians. The last three
    are non-radial.
    """
    r = sp.Symbol("r", nonnegative=True)
    x, y, z = xyz = sp.symbols("x y z", real=True)
    out = []
    for sigma in (sp.Rational(1, 2), sp.Integer(1), sp.Integer(2)):
        out.append(_radial_member(f"gauss{float(sigma):g}", sp.exp(-r ** 2 / (2 * sigma ** 2)),
                                  r, np.inf, 12 * float(sigma)))
    for p in (sp.Rational(1, 4), sp.Integer(1), sp.Rational(5, 2)):
        out.append(_radial_member(f"algebraic{float(p):g}", (1 + r ** 2) ** (-p), r,
                                  2 * float(p), np.inf))
    q = (r / sp.Rational(3, 2)) ** 2
    out.append(_radial_member("bump1.5", sp.Piecewise((sp.exp(1 - 1 / (1 - q)), q < 1),
                                                      (0, True)), r, np.inf, 1.5))
    q = (x - sp.Rational(1, 2)) ** 2 + y ** 2 + z ** 2
    out.append(_cartesian_member("bump-shifted", sp.Piecewise((sp.exp(1 - 1 / (1 - q)), q < 1),
                                                              (0, True)), xyz,
                                 ((-0.5, 1.5), (-1.0, 1.0), (-1.0, 1.0))))
    out.append(_cartesian_member("gauss-aniso", sp.exp(-(x ** 2 / 4 + y ** 2 + 4 * z ** 2) / 2),
                                 xyz, ((-13.0, 13.0), (-6.5, 6.5), (-3.25, 3.25))))
    out.append(_cartesian_member("gauss-aniso-shifted",
                                 sp.exp(-((x - sp.Rational(1, 2)) ** 2 + 4 * y ** 2 + 4 * z ** 2) / 2),
                                 xyz, ((-6.0, 7.0), (-3.25, 3.25), (-3.25, 3.25))))
    return out


def corpus_from_grid(u: GridFunction, name: str = "grid") -> CorpusFunction:
    """Wrap a scalar grid function as a corpus member.

    Radial members use the C^2 spline interpolant (with its inverse-power
    continuation) and take their decay rate from the last two samples; box
    members are treated as supported in the box.
    """
    if u.rank != "scalar":
        raise ValueError("corpus members must be scalar fields")
    g = u.geometry
    if g.kind == "radial":
        value = radial_interpolant(u)
        grad = radial_interpolant(derivative(u))
        r = g.r
        decay = np.inf
        if u.samples[-1] > 0 and u.samples[-2] > 0:
            decay = float(-np.log(u.samples[-1] / u.samples[-2]) / np.log(r[-1] / r[-2]))
        return CorpusFunction(name, value, grad, True, decay, np.inf)
    value = box_sampler(u)
    parts = [box_sampler(derivative(u, ax)) for ax in range(3)]
    half = g.half_width
    return CorpusFunction(name, value, lambda x, y, z: np.stack([p(x, y, z) for p in parts]),
                          False, np.inf, ((-half, half),) * 3)


def _as_member(u, index: int) -> CorpusFunction:
    if isinstance(u, CorpusFunction):
        return u
    if isinstance(u, GridFunction):
        return corpus_from_grid(u, f"grid{index}")
    raise TypeError(f"corpus entries must be CorpusFunction or GridFunction, got {type(u).__name__}")


# ----------------------------------------------------------- evaluation


def _pointwise(fn: Callable, members, name: str):
    """Field ``fn(u_1(x), ..., u_k(x))``; radial when every member is radial."""
    if all(m.radial for m in members):
        def profile(r):
            with np.errstate(all="ignore"):
                return np.asarray(fn(*[m.profile(r) for m in members]), dtype=float)
        return RadialField(profile, "scalar", name)

    def evaluate(x, y, z):
        with np.errstate(all="ignore"):
            return np.asarray(fn(*[m(x, y, z) for m in members]), dtype=float)
    return CartesianField(evaluate, "scalar", name)


_RADII = np.concatenate([np.linspace(0.0, 4.0, 4001)[:-1], np.geomspace(4.0, 2.0 ** 14, 4000)])


def _fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    polar = np.arccos(1.0 - 2.0 * i / n)
    azim = np.pi * (1.0 + 5.0 ** 0.5) * i
    return np.stack([np.cos(azim) * np.sin(polar), np.sin(azim) * np.sin(polar), np.cos(polar)])


_DIRECTIONS = _fibonacci_sphere(256)


def _scan(member: CorpusFunction, weight: float = 0.0):
    """Values and radii along a radial scan (rays for non-radial members)."""
    if member.radial:
        vals = member.profile(_RADII)
        rad = _RADII
    else:
        radii = _RADII[::4]
        pts = _DIRECTIONS[:, :, None] * radii[None, None, :]
        vals = member(pts[0], pts[1], pts[2]).ravel()
        rad = np.broadcast_to(radii, pts.shape[1:]).ravel()
    return vals, rad


def weighted_sup(member: CorpusFunction, weight: float = 0.0) -> float:
    """``sup (1 + |x|)^weight |u|`` by a dense scan along rays."""
    vals, rad = _scan(member)
    return float(np.max((1.0 + rad) ** weight * np.abs(vals)))


def _value_range(member: CorpusFunction):
    vals, _ = _scan(member)
    return float(min(np.min(vals), 0.0)), float(max(np.max(vals), 0.0))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


def _gauss_legendre(g: Callable, a: float, b: float) -> float:
    half = 0.5 * (b - a)
    t = a + half * (_GL_NODES + 1.0)
    return float(half * np.sum(_GL_WEIGHTS * np.nan_to_num(g(t))))


def _radial_integral(g: Callable, cutoff: float) -> float:
    """``4 pi int_0^inf g(r) r^2 dr``.

    48-point Gauss-Legendre on dyadic segments ``[2^k, 2^(k+1)]`` and, past
    ``2^14``, on the substitution ``r = R / t`` (exact for power laws up to
    high degree).
    """
    edges = [0.0] + [2.0 ** k for k in range(-6, 15)]
    finite = np.isfinite(cutoff)
    if finite:
        edges = [e for e in edges if e < cutoff] + [cutoff]

    def h(r):
        return g(r) * r * r

    total = sum(_gauss_legendre(h, lo, hi) for lo, hi in zip(edges[:-1], edges[1:]))
    if not finite:
        big = edges[-1]
        total += _gauss_legendre(lambda t: h(big / t) * big / (t * t), 0.0, 1.0)
    return 4.0 * np.pi * total


_BOX_POINTS = 96


def _box_integral(g: Callable, bounds) -> float:
    axes = [np.linspace(lo, hi, _BOX_POINTS) for lo, hi in bounds]
    x, y, z = np.meshgrid(*axes, indexing="ij")
    with np.errstate(all="ignore"):
        vals = np.nan_to_num(np.asarray(g(x, y, z), dtype=float))
    for ax in range(3):
        vals = integrate.trapezoid(vals, axes[ax], axis=0)
    return float(vals)


def _weighted_integral(fn: Callable, members, power: float) -> float:
    """``int (1 + |x|)^power |fn(u_1, ..., u_k)|^q dx`` with ``fn`` returning the integrand."""
    if all(m.radial for m in members):
        cutoff = max(float(m.bounds) for m in members)

        def g(r):
            with np.errstate(all="ignore"):
                return (1.0 + r) ** power * fn(*[m.profile(r) for m in members])
        return _radial_integral(g, cutoff)
    boxes = [m.bounds for m in members if not m.radial]
    bounds = tuple((min(b[i][0] for b in boxes), max(b[i][1] for b in boxes)) for i in range(3))

    def g3(x, y, z):
        rr = np.sqrt(x * x + y * y + z * z)
        return (1.0 + rr) ** power * fn(*[m(x, y, z) for m in members])
    return _box_integral(g3, bounds)


def _l2_finite(decay: float, delta: float) -> bool:
    """``(1 + r)^delta r^-decay`` is square integrable at infinity."""
    return decay > delta + 1.5


class _Evaluator:
    """Weighted norms with a per-run cache keyed by field label."""

    def __init__(self, params: IneqParams):
        self.params = params
        self._cache = {}

    def norm(self, label: str, fld, s: float, delta: float) -> NormBreakdown:
        key = (label, round(s, 12), round(delta, 12))
        if key not in self._cache:
            self._cache[key] = weighted_norm(fld, self.params.spec(s, delta))
        return self._cache[key]

    def member_norm(self, m: CorpusFunction, s: float, delta: float) -> NormBreakdown:
        return self.norm(m.name, m.field(), s, delta)


class _Skip(Exception):
    pass


def _finite(b: NormBreakdown, what: str) -> float:
    if b.divergent:
        raise _Skip(f"{what}: shell series divergent")
    return b.norm


# --------------------------------------------------------------- report


@dataclass(frozen=True)
class RatioCase:
    """One evaluated instance ``lhs <= C rhs`` with ``ratio = lhs / rhs``."""

    case_id: str
    base: str
    lhs: float
    rhs: float
    ratio: float
    dilation: float = 1.0
    amplitude: float = 1.0
    detail: dict = field(default_factory=dict)


@dataclass
class RatioReport:
    """Ratio statistics of one inequality family over a corpus.

    ``max_ratio`` is the empirical constant. ``raw_dilation_spread`` is the
    factor by which dilating the corpus raises it (max ratio over all
    dilations over the max ratio at ``lambda = 1``) and
    ``dilation_spread`` the same factor per norm factor on the right-hand
    side (its ``1/degree`` power), which keeps high powers such as
    ``||w||^beta`` comparable with linear estimates. ``amplitude_spread``
    is the largest max/min factor of a base case's ratio over amplitude
    scales (difference family only).
    ``bound`` is an a-priori upper bound for the ratio when the estimate
    carries an explicit constant. Boundedness is certified only on the
    corpus given.
    """

    kind: InequalityKind
    params: dict
    corpus: tuple
    cases: list
    skipped: list
    max_ratio: float
    dilation_spread: float
    raw_dilation_spread: float
    amplitude_spread: float
    bound: float | None
    passed: bool
    failures: list

    @property
    def skipped_count(self) -> int:
        return len(self.skipped)

    def rows(self):
        return [(c.case_id, c.lhs, c.rhs, c.ratio) for c in self.cases]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("case_id", "lhs", "rhs", "ratio"))
            for row in self.rows():
                writer.writerow([row[0]] + [f"{v:.17g}" for v in row[1:]])

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{self.kind.value}: {status} max_ratio={self.max_ratio:.4g} "
                f"dilation_spread={self.dilation_spread:.3g} (raw {self.raw_dilation_spread:.3g}) "
                f"cases={len(self.cases)} "
                f"skipped={self.skipped_count}")


def _dilation_spread(cases, degree: float = 1.0) -> tuple:
    """Growth of the max ratio when the corpus is dilated.

    Returns ``(raw, per_factor)``: the max ratio over all dilations over the
    max ratio at ``lambda = 1``, and its ``1/degree`` power, where ``degree``
    counts the norm factors on the right-hand side.
    """
    ref = [c.ratio for c in cases if c.dilation == 1.0]
    if not ref:
        return 1.0, 1.0
    top, ref = max(c.ratio for c in cases), max(ref)
    if ref <= 0:
        raw = np.inf if top > 0 else 1.0
    else:
        raw = max(float(top / ref), 1.0)
    return raw, raw ** (1.0 / degree)


def _amplitude_spread(cases) -> float:
    """Largest max/min factor of a base case's ratio across amplitude scales."""
    groups = {}
    for c in cases:
        groups.setdefault((c.base, c.dilation), []).append(c.ratio)
    worst = 1.0
    for ratios in groups.values():
        ratios = np.array(ratios)
        if ratios.size < 2 or np.max(ratios) == 0:
            continue
        worst = max(worst, float(np.max(ratios) / np.min(ratios)) if np.min(ratios) > 0 else np.inf)
    return worst


def _rhs_degree(kind: InequalityKind, p: IneqParams) -> float:
    """Number of norm factors on the right-hand side of ``kind``."""
    if kind is InequalityKind.MULTIPLICATION:
        return 2.0
    if kind is InequalityKind.PRODUCT:
        return float(min(p.product_orders))
    if kind is InequalityKind.POWER:
        return p.power if p.power_is_integer else float(p.power_floor)
    if kind is InequalityKind.POWER_MASS:
        return float(p.power_floor)
    if kind is InequalityKind.DIFFERENCE:
        return p.power
    return 1.0


def _assemble(kind, params, members, cases, skipped, bound) -> RatioReport:
    failures = []
    ratios = np.array([c.ratio for c in cases])
    if not cases:
        failures.append("no evaluable cases")
    if any(not (np.isfinite(c.ratio) and c.ratio >= 0 and c.rhs > 0) for c in cases):
        failures.append("non-finite, negative or zero-denominator ratio")
    max_ratio = float(np.max(ratios)) if cases else float("nan")
    raw, dil = _dilation_spread(cases, _rhs_degree(kind, params))
    amp = _amplitude_spread(cases) if kind is InequalityKind.DIFFERENCE else 1.0
    if dil > params.dilation_tol:
        failures.append(f"ratio grows by {dil:.3g} per norm factor across dilations "
                        f"(tolerance {params.dilation_tol})")
    if amp > params.dilation_tol:
        failures.append(f"ratio varies by {amp:.3g} across amplitudes (tolerance {params.dilation_tol})")
    if bound is not None and cases and max_ratio > bound:
        failures.append(f"max ratio {max_ratio:.6g} exceeds the bound {bound:.6g}")
    pdict = {k: getattr(params, k) for k in params.__dataclass_fields__}
    pdict["beta"] = params.power
    return RatioReport(InequalityKind(kind), pdict, tuple(m.name for m in members), cases,
                       skipped, max_ratio, dil, raw, amp, bound, not failures, failures)


# ------------------------------------------------------ per-kind cases


def _case(cases, skipped, case_id, base, compute, dilation=1.0, amplitude=1.0):
    try:
        lhs, rhs, detail = compute()
    except _Skip as exc:
        skipped.append((case_id, str(exc)))
        return
    if not rhs > 0:
        skipped.append((case_id, "degenerate: right-hand side vanishes"))
        return
    cases.append(RatioCase(case_id, base, float(lhs), float(rhs), float(lhs / rhs),
                           dilation, amplitude, detail))


def _cid(base: str, lam: float, amp: float = 1.0) -> str:
    out = f"{base}|lambda={lam:g}"
    return out if amp == 1.0 else f"{out}|a={amp:g}"


def _kind_embedding(ev, members, p, cases, skipped):
    beta = p.embedding_weight
    for m0 in members:
        for lam in p.dilations:
            m = m0.dilated(lam)

            def compute(m=m):
                rhs = _finite(ev.member_norm(m, p.s, p.delta), m.name)
                return weighted_sup(m, beta), rhs, {}
            _case(cases, skipped, _cid(m0.name, lam), m0.name, compute, lam)


def _kind_l1(ev, members, p, cases, skipped):
    w = p.l1_weight
    for m0 in members:
        for lam in p.dilations:
            m = m0.dilated(lam)

            def compute(m=m):
                if not m.decay > 3.0:
                    raise _Skip(f"{m.name}: not integrable (decay {m.decay:g} <= 3)")
                if not _l2_finite(m.decay, w):
                    raise _Skip(f"{m.name}: L^2 weight {w:g} norm infinite")
                l1 = _weighted_integral(np.abs, [m], 0.0)
                l2 = math.sqrt(_weighted_integral(np.square, [m], 2.0 * w))
                return l1, l2, {}
            _case(cases, skipped, _cid(m0.name, lam), m0.name, compute, lam)
    return math.sqrt(_radial_integral(lambda r: (1.0 + r) ** (-2.0 * w), np.inf))


def _kind_derivative(ev, members, p, cases, skipped):
    for m0 in members:
        for lam in p.dilations:
            m = m0.dilated(lam)
            if m.radial:
                def compute(m=m):
                    grad = RadialField(m.gradient, "radial-vector", f"grad {m.name}")
                    g = _finite(ev.norm(f"grad {m.name}", grad, p.s - 1, p.delta + 1), "gradient")
                    u = _finite(ev.member_norm(m, p.s, p.delta), m.name)
                    return g / math.sqrt(3.0), u, {"component": "any (radial symmetry)"}
                _case(cases, skipped, _cid(m0.name, lam), m0.name, compute, lam)
                continue
            for ax in range(3):
                def compute(m=m, ax=ax):
                    part = CartesianField(lambda x, y, z: m.gradient(x, y, z)[ax])
                    label = f"d{ax} {m.name}"
                    g = _finite(ev.norm(label, part, p.s - 1, p.delta + 1), "derivative")
                    u = _finite(ev.member_norm(m, p.s, p.delta), m.name)
                    return g, u, {"component": ax}
                base = f"{m0.name}/d{ax}"
                _case(cases, skipped, _cid(base, lam), base, compute, lam)


def _kind_multiplication(ev, members, p, cases, skipped):
    d_out = 2 * p.delta + 1.5
    for i, a0 in enumerate(members):
        for b0 in members[i:]:
            base = f"{a0.name}*{b0.name}"
            for lam in p.dilations:
                a, b = a0.dilated(lam), b0.dilated(lam)

                def compute(a=a, b=b):
                    fld = _pointwise(np.multiply, [a, b], f"{a.name}*{b.name}")
                    lhs = _finite(ev.norm(fld.name, fld, p.s, d_out), "product")
                    na = _finite(ev.member_norm(a, p.s, p.delta), a.name)
                    nb = _finite(ev.member_norm(b, p.s, p.delta), b.name)
                    return lhs, na * nb, {"delta_out": d_out}
                _case(cases, skipped, _cid(base, lam), base, compute, lam)


def _kind_product(ev, members, p, cases, skipped):
    n = len(members)
    for m_ord in p.product_orders:
        d_out = m_ord * p.delta + 1.5 * (m_ord - 1)
        for i in range(n):
            group0 = [members[(i + k) % n] for k in range(m_ord)]
            base = "*".join(g.name for g in group0)
            for lam in p.dilations:
                group = [g.dilated(lam) for g in group0]

                def compute(group=group):
                    name = "*".join(g.name for g in group)
                    fld = _pointwise(lambda *v: np.prod(np.stack(v), axis=0), group, name)
                    lhs = _finite(ev.norm(name, fld, p.s, d_out), "product")
                    rhs = 1.0
                    for g in group:
                        rhs *= _finite(ev.member_norm(g, p.s, p.delta), g.name)
                    return lhs, rhs, {"order": len(group), "delta_out": d_out}
                _case(cases, skipped, _cid(base, lam), base, compute, lam)


_MOSER = {
    "rational": lambda u: u / (1 + u ** 2),
    "sine": sp.sin,
}


def moser_constant(name: str, order: int, lo: float, hi: float, samples: int = 4001) -> float:
    """``sum_{k <= order} sup_[lo, hi] |F^(k)|`` with derivatives taken symbolically."""
    u = sp.Symbol("u", real=True)
    expr = _MOSER[name](u)
    if expr.subs(u, 0) != 0:
        raise HypothesisError(f"F(0) = 0 violated for {name}")
    grid = np.linspace(lo, hi, samples)
    total = 0.0
    d = expr
    for _ in range(order + 1):
        f = sp.lambdify(u, d, "numpy")
        total += float(np.max(np.abs(np.broadcast_to(f(grid), grid.shape))))
        d = sp.diff(d, u)
    return total


def _kind_moser(ev, members, p, cases, skipped):
    order_n = int(math.floor(p.s)) + 1
    for fname in p.moser_functions:
        if fname not in _MOSER:
            raise ValueError(f"unknown Moser test function {fname!r}; known: {sorted(_MOSER)}")
        fnum = sp.lambdify(sp.Symbol("u"), _MOSER[fname](sp.Symbol("u")), "numpy")
        for m0 in members:
            lo, hi = _value_range(m0)
            cf = moser_constant(fname, order_n + 1, lo, hi)
            sup = max(abs(lo), abs(hi))
            base = f"{fname}({m0.name})"
            for lam in p.dilations:
                m = m0.dilated(lam)

                def compute(m=m):
                    fld = _pointwise(fnum, [m], f"{fname}({m.name})")
                    lhs = _finite(ev.norm(fld.name, fld, p.s, p.delta), "composition")
                    u = _finite(ev.member_norm(m, p.s, p.delta), m.name)
                    return lhs, cf * (1.0 + sup ** order_n) * u, {"C^{N+1}": cf, "N": order_n}
                _case(cases, skipped, _cid(base, lam), base, compute, lam)


def _kind_kateb(ev, members, p, cases, skipped):
    k = p.kateb_power
    for m0 in members:
        sup = weighted_sup(m0)
        for lam in p.dilations:
            m = m0.dilated(lam)

            def compute(m=m):
                fld = _pointwise(lambda v: np.abs(v) ** k, [m], f"|{m.name}|^{k:g}")
                lhs = _finite(ev.norm(fld.name, fld, p.s, p.delta), "power")
                u = _finite(ev.member_norm(m, p.s, p.delta), m.name)
                return lhs, sup ** (k - 1.0) * u, {"sup": sup}
            _case(cases, skipped, _cid(m0.name, lam), m0.name, compute, lam)


def _kind_intermediate(ev, members, p, cases, skipped):
    sp_ = p.upper_order
    theta = p.s / sp_
    for m0 in members:
        for lam in p.dilations:
            m = m0.dilated(lam)

            def compute(m=m):
                mid = _finite(ev.member_norm(m, p.s, p.delta), m.name)
                low = _finite(ev.member_norm(m, 0.0, p.delta), m.name)
                high = _finite(ev.member_norm(m, sp_, p.delta), m.name)
                return mid, low ** (1.0 - theta) * high ** theta, {"s_prime": sp_}
            _case(cases, skipped, _cid(m0.name, lam), m0.name, compute, lam)
    return 1.0 + p.intermediate_tol


def _check_nonnegative(members):
    for m in members:
        lo, _ = _value_range(m)
        if lo < 0:
            raise HypothesisError(f"w >= 0 violated by corpus member {m.name} (min {lo:g})")


def _kind_power(ev, members, p, cases, skipped, mass: bool):
    _check_nonnegative(members)
    b = p.power
    expo = b if p.power_is_integer else p.power_floor
    if mass:
        expo = p.power_floor
        d_out = p.mass_target
    else:
        d_out = p.delta + 2.0
    for m0 in members:
        for lam in p.dilations:
            m = m0.dilated(lam)

            def compute(m=m):
                fld = _pointwise(lambda v: np.maximum(v, 0.0) ** b, [m], f"{m.name}^{b:g}")
                lhs = _finite(ev.norm(fld.name, fld, p.s - 1.0, d_out), "power")
                u = _finite(ev.member_norm(m, p.s, p.delta), m.name)
                return lhs, u ** expo, {"delta_out": d_out, "exponent": expo}
            _case(cases, skipped, _cid(m0.name, lam), m0.name, compute, lam)


def difference_terms(w1: CorpusFunction, w2: CorpusFunction, params: IneqParams, ev=None):
    """Both sides of the power-difference estimate for one pair.

    Returns ``(lhs, gap, c_d, envelope)`` with
    ``lhs = ||w1^b - w2^b||_{L^2_{delta+2}}``, ``gap = ||w1 - w2||_{L^2_delta}``,
    ``c_d = lhs / gap`` (``nan`` if the gap vanishes) and
    ``envelope = (b^2/2)(||w1||_{s,delta}^{2(b-1)} + ||w2||_{s,delta}^{2(b-1)})``.
    """
    ev = ev or _Evaluator(params)
    b, d = params.power, params.delta
    for m in (w1, w2):
        if not (_l2_finite(m.decay, d) and _l2_finite(b * m.decay, d + 2.0)):
            raise _Skip(f"{m.name}: weighted L^2 norm infinite")
    lhs = math.sqrt(_weighted_integral(
        lambda u, v: (np.maximum(u, 0.0) ** b - np.maximum(v, 0.0) ** b) ** 2, [w1, w2],
        2.0 * (d + 2.0)))
    gap = math.sqrt(_weighted_integral(lambda u, v: (u - v) ** 2, [w1, w2], 2.0 * d))
    n1 = _finite(ev.member_norm(w1, params.s, d), w1.name)
    n2 = _finite(ev.member_norm(w2, params.s, d), w2.name)
    env = 0.5 * b * b * (n1 ** (2 * (b - 1)) + n2 ** (2 * (b - 1)))
    c_d = lhs / gap if gap > 0 else float("nan")
    return lhs, gap, c_d, env


def _perturbed(m: CorpusFunction) -> CorpusFunction:
    """``u (1 + exp(-|x|^2/2) / 2)``, a nonnegative perturbation of ``u``."""
    val, grad = m.value, m.gradient
    if m.radial:
        def value(r):
            return val(r) * (1.0 + 0.5 * np.exp(-0.5 * r * r))

        def gradient(r):
            g = np.exp(-0.5 * r * r)
            return np.asarray(grad(r)) * (1.0 + 0.5 * g) - 0.5 * r * g * val(r)
    else:
        def value(x, y, z):
            return val(x, y, z) * (1.0 + 0.5 * np.exp(-0.5 * (x * x + y * y + z * z)))

        def gradient(x, y, z):
            g = np.exp(-0.5 * (x * x + y * y + z * z))
            return (np.asarray(grad(x, y, z)) * (1.0 + 0.5 * g)
                    - 0.5 * np.stack([x, y, z]) * g * val(x, y, z))
    return replace(m, name=f"{m.name}~", value=value, gradient=gradient)


def _kind_difference(ev, members, p, cases, skipped):
    _check_nonnegative(members)
    pairs = [(m, _perturbed(m)) for m in members]
    for geom in (True, False):
        same = [m for m in members if m.radial == geom]
        pairs += list(zip(same[:-1], same[1:]))
    for a0, b0 in pairs:
        base = f"{a0.name}|{b0.name}"
        for lam in p.dilations:
            for amp in p.amplitudes:
                a, b = a0.dilated(lam).scaled(amp), b0.dilated(lam).scaled(amp)

                def compute(a=a, b=b):
                    lhs, gap, c_d, env = difference_terms(a, b, p, ev)
                    return lhs, math.sqrt(env) * gap, {"c_d": c_d, "envelope": env}
                _case(cases, skipped, _cid(base, lam, amp), base, compute, lam, amp)


def _kind_elliptic(ev, members, p, cases, skipped):
    grid = RadialGrid(p.elliptic_r_max, p.elliptic_n)
    spec = p.spec(p.s, p.delta)
    for m0 in members:
        if not m0.radial:
            skipped.append((m0.name, "elliptic family runs on radial members only"))
            continue
        for lam in p.dilations:
            m = m0.dilated(lam)

            def compute(m=m):
                rho = sample_analytic(m.profile, grid)
                pot = solve_poisson_radial(rho)
                rep = elliptic_estimate_report(m.field(), pot, spec)
                if rep.divergent:
                    raise _Skip(f"{m.name}: shell series divergent")
                return rep.grad_norm, rep.rho_norm, {}
            _case(cases, skipped, _cid(m0.name, lam), m0.name, compute, lam)


_RUNNERS = {
    InequalityKind.EMBEDDING: _kind_embedding,
    InequalityKind.L1_EMBEDDING: _kind_l1,
    InequalityKind.DERIVATIVE: _kind_derivative,
    InequalityKind.MULTIPLICATION: _kind_multiplication,
    InequalityKind.PRODUCT: _kind_product,
    InequalityKind.MOSER: _kind_moser,
    InequalityKind.KATEB: _kind_kateb,
    InequalityKind.INTERMEDIATE: _kind_intermediate,
    InequalityKind.POWER: lambda *a: _kind_power(*a, mass=False),
    InequalityKind.POWER_MASS: lambda *a: _kind_power(*a, mass=True),
    InequalityKind.DIFFERENCE: _kind_difference,
    InequalityKind.ELLIPTIC: _kind_elliptic,
}


def check_inequality(kind, corpus=None, params: IneqParams | None = None) -> RatioReport:
    """Evaluate one inequality family over a corpus and its dilations.

    Parameters
    ----------
    kind : InequalityKind or str
    corpus : list of CorpusFunction or GridFunction, optional
        Defaults to :func:`default_corpus`.
    params : IneqParams, optional

    Raises
    ------
    HypothesisError
        If ``params`` violate the family's hypotheses, naming each bound.
    """
    kind = InequalityKind(kind)
    params = params or IneqParams()
    bad = hypothesis_violations(kind, params)
    if bad:
        raise HypothesisError(f"{kind.value}: " + "; ".join(bad))
    members = [_as_member(u, i) for i, u in enumerate(default_corpus() if corpus is None else corpus)]
    ev = _Evaluator(params)
    cases, skipped = [], []
    bound = _RUNNERS[kind](ev, members, params, cases, skipped)
    return _assemble(kind, params, members, cases, skipped, bound)
