import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from eplab.fluid import (
    EosParams,
    FluidState,
    check_theorem_range,
    density_from_w,
    flux_matrices,
    hydrostatic_K,
    makino_w,
    pressure,
    static_profile,
)
from eplab.grid import BoxGrid, GridFunction, RadialGrid

gammas = st.floats(1.01, 1.66)
Ks = st.floats(0.01, 10.0)


@settings(max_examples=50, deadline=None)
@given(gamma=gammas, K=Ks, rho=st.floats(1e-8, 1e3))
def test_makino_roundtrip(gamma, K, rho):
    eos = EosParams(gamma, K)
    np.testing.assert_allclose(density_from_w(makino_w(rho, eos), eos), rho, rtol=1e-10)


@settings(max_examples=50, deadline=None)
@given(gamma=gammas, K=Ks, rho=st.floats(1e-6, 1e3))
def test_sound_speed_is_half_gm1_w(gamma, K, rho):
    eos = EosParams(gamma, K)
    c2 = K * gamma * rho ** (gamma - 1)
    np.testing.assert_allclose((eos.half_gm1 * makino_w(rho, eos)) ** 2, c2, rtol=1e-10)
    np.testing.assert_allclose(pressure(rho, eos), K * rho ** gamma)


def test_negative_w_maps_to_vacuum():
    eos = EosParams(1.2, 1.0)
    assert density_from_w(-1.0, eos) == 0.0
    with pytest.raises(ValueError):
        makino_w(-1.0, eos)
    with pytest.raises(ValueError):
        pressure(-1.0, eos)


@settings(max_examples=40, deadline=None)
@given(gamma=gammas, w=st.floats(0, 10), v=st.lists(st.floats(-5, 5), min_size=3, max_size=3),
       n=st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_symbol_is_symmetric_with_characteristic_speeds(gamma, w, v, n):
    eos = EosParams(gamma, 1.0)
    a = flux_matrices(w, v, eos, n)
    assert np.array_equal(a, a.T)
    vn = float(np.dot(v, n))
    c = eos.half_gm1 * w * np.linalg.norm(n)
    expected = np.sort([vn, vn, vn - c, vn + c])
    np.testing.assert_allclose(np.linalg.eigvalsh(a), expected, atol=1e-9 * (1 + abs(vn) + c))


def test_eos_validation():
    with pytest.raises(ValueError):
        EosParams(1.0, 1.0)
    with pytest.raises(ValueError):
        EosParams(1.2, 0.0)
    EosParams(2.0, 1.0)
    with pytest.raises(ValueError, match="admissible"):
        check_theorem_range(5.0 / 3.0)
    check_theorem_range(1.2)


def test_fluid_state_validation():
    g = RadialGrid(1.0, 8)
    w = GridFunction(g, np.ones(8))
    with pytest.raises(ValueError, match="radial-vector"):
        FluidState(w, GridFunction(g, np.zeros(8)))
    with pytest.raises(ValueError, match="share"):
        FluidState(w, GridFunction(RadialGrid(2.0, 8), np.zeros(8), "radial-vector"))
    b = BoxGrid(1.0, 8)
    FluidState(GridFunction(b, np.ones(b.shape)), GridFunction(b, np.zeros((3,) + b.shape), "vector"))


@pytest.mark.parametrize("a", [1.0, 2.0])
def test_static_constant_matches_balance_oracle(a):
    prof = static_profile(a)
    np.testing.assert_allclose(hydrostatic_K(prof.rho, 1.2), 2 * np.pi / 9, rtol=1e-8)


def test_static_profile_solves_poisson_and_balance_symbolically():
    r, a = sp.symbols("r a", positive=True)
    rho = a ** sp.Rational(5, 2) * (a ** 2 + r ** 2) ** sp.Rational(-5, 2)
    phi = -sp.Rational(4, 3) * sp.pi * sp.sqrt(a) / sp.sqrt(a ** 2 + r ** 2)
    lap = sp.diff(r ** 2 * sp.diff(phi, r), r) / r ** 2
    assert sp.simplify(lap - 4 * sp.pi * rho) == 0
    K, gamma = 2 * sp.pi / 9, sp.Rational(6, 5)
    balance = K * gamma * rho ** (gamma - 2) * sp.diff(rho, r) + sp.diff(phi, r)
    assert sp.simplify(balance) == 0


@pytest.mark.parametrize("a", [0.5, 1.0, 3.0])
def test_static_profile_closed_forms(a):
    prof = static_profile(a)
    mass = 4 * np.pi * quad(lambda s: prof.rho(s) * s * s, 0, np.inf, epsrel=1e-12)[0]
    np.testing.assert_allclose(mass, prof.mass, rtol=1e-10)
    r = np.linspace(0.1, 10, 7)
    h = 1e-6
    np.testing.assert_allclose(prof.dphi(r), (prof.phi(r + h) - prof.phi(r - h)) / (2 * h), rtol=1e-7)
    np.testing.assert_allclose(density_from_w(prof.w(r), prof.eos), prof.rho(r), rtol=1e-12)
