import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eplab.grid import GridFunction, RadialGrid, sample_analytic
from eplab.ineq_lab import (
    HypothesisError,
    IneqParams,
    InequalityKind,
    _radial_integral,
    check_inequality,
    corpus_from_grid,
    default_corpus,
    difference_terms,
    hypothesis_violations,
    moser_constant,
    multiplication_admissible,
    product_admissible,
    weighted_sup,
)

CORPUS = {m.name: m for m in default_corpus()}
SMALL = [CORPUS["gauss1"], CORPUS["algebraic2.5"]]
FAST = IneqParams(j_max=8)


def test_corpus_has_ten_named_members():
    assert len(CORPUS) == 10
    assert sum(not m.radial for m in CORPUS.values()) == 3


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_corpus_gradients_match_finite_differences(name):
    m = CORPUS[name]
    h = 1e-6
    if m.radial:
        r = np.array([0.3, 0.9, 1.7, 4.0])
        fd = (m.profile(r + h) - m.profile(r - h)) / (2 * h)
        np.testing.assert_allclose(m.gradient(r), fd, rtol=1e-5, atol=1e-9)
    else:
        p = np.array([[0.3, -0.2, 0.1], [0.7, 0.4, -0.3]]).T
        g = m.gradient(*p)
        for ax in range(3):
            e = np.zeros((3, 1))
            e[ax] = h
            fd = (m(*(p + e)) - m(*(p - e))) / (2 * h)
            np.testing.assert_allclose(g[ax], fd, rtol=1e-5, atol=1e-9)


def test_dilation_and_scaling():
    m = CORPUS["gauss-aniso"]
    x, y, z = np.array([0.5]), np.array([-0.3]), np.array([0.2])
    np.testing.assert_allclose(m.dilated(2.0)(x, y, z), m(2 * x, 2 * y, 2 * z))
    np.testing.assert_allclose(m.scaled(3.0)(x, y, z), 3 * m(x, y, z))
    r = CORPUS["algebraic1"]
    np.testing.assert_allclose(r.dilated(0.5).gradient(np.array([2.0])), 0.5 * r.gradient(np.array([1.0])))


def test_weighted_sup_scan():
    assert weighted_sup(CORPUS["gauss1"]) == pytest.approx(1.0)
    # (1 + r) / (1 + r^2) peaks at r = sqrt(2) - 1
    assert weighted_sup(CORPUS["algebraic1"], 1.0) == pytest.approx((1 + np.sqrt(2)) / 2, rel=1e-6)


def test_radial_integral_of_gaussian_and_power_law():
    assert _radial_integral(lambda r: np.exp(-r * r / 2), np.inf) == pytest.approx((2 * np.pi) ** 1.5, rel=1e-12)
    # 4 pi int (1 + r)^-4 r^2 dr = 4 pi / 3
    assert _radial_integral(lambda r: (1 + r) ** -4.0, np.inf) == pytest.approx(4 * np.pi / 3, rel=1e-10)


@settings(max_examples=200, deadline=None)
@given(s=st.floats(0.0, 5.0), d1=st.floats(-3, 3), d2=st.floats(-3, 3), delta=st.floats(-6, 6))
def test_two_factor_product_and_multiplication_agree_on_admissibility(s, d1, d2, delta):
    prod = product_admissible(s, delta, [d1, d2])
    mult = multiplication_admissible(s, s, s, delta, d1, d2)
    assert (not prod) == (not mult)


def test_corner_admissibility():
    corner = IneqParams()
    for kind in InequalityKind:
        bad = hypothesis_violations(kind, corner)
        assert bool(bad) == (kind is InequalityKind.POWER_MASS), (kind, bad)
    assert not hypothesis_violations(InequalityKind.POWER_MASS, IneqParams(delta=-1.15))


@pytest.mark.parametrize("kind, params, fragment", [
    ("power-mass", IneqParams(), "delta > 3/[beta] - 3/2"),
    ("power", IneqParams(delta=-1.3), "delta >= 2/([beta]-1) - 3/2"),
    ("power", IneqParams(beta=2.5, s=3.2), "5/2 < s < beta - [beta] + 5/2"),
    ("difference", IneqParams(delta=-1.3), "inherits the power hypotheses"),
    ("elliptic", IneqParams(delta=-0.4), "-3/2 < delta < -1/2"),
    ("kateb", IneqParams(s=12.0), "0 < s < exponent + 1/2"),
    ("l1-embedding", IneqParams(l1_weight=1.5), "weight > 3/2"),
    ("embedding", IneqParams(sup_weight=0.5), "sup weight <= delta + 3/2"),
    ("intermediate", IneqParams(s_prime=2.0), "0 < s < s'"),
    ("product", IneqParams(s=1.4), "s > 3/2"),
])
def test_hypothesis_errors_name_the_violated_bound(kind, params, fragment):
    with pytest.raises(HypothesisError, match="^" + kind) as info:
        check_inequality(kind, SMALL, params)
    assert fragment in str(info.value)


def test_params_validation():
    with pytest.raises(ValueError):
        IneqParams(dilations=(0.5, 2.0))
    with pytest.raises(ValueError):
        IneqParams(amplitudes=(2.0,))
    with pytest.raises(ValueError):
        InequalityKind("bogus")


def test_moser_constant_of_sine():
    # sup over [0, 1] of |sin|, |cos|, |sin| sums to 1 + 2 sin 1
    assert moser_constant("sine", 2, 0.0, 1.0) == pytest.approx(1 + 2 * np.sin(1.0))
    assert moser_constant("rational", 0, 0.0, 2.0) == pytest.approx(0.5)


def test_difference_of_identical_arguments_vanishes():
    w = CORPUS["gauss1"]
    lhs, gap, c_d, env = difference_terms(w, w, FAST)
    assert lhs == 0.0 and gap == 0.0 and math.isnan(c_d) and env > 0


def test_difference_of_two_members():
    lhs, gap, c_d, env = difference_terms(CORPUS["gauss1"], CORPUS["gauss2"], FAST)
    assert lhs > 0 and gap > 0
    assert c_d == pytest.approx(lhs / gap)
    assert c_d ** 2 <= env


def test_intermediate_interpolation_bound():
    rep = check_inequality("intermediate", SMALL, FAST)
    assert rep.passed and rep.max_ratio <= 1 + 1e-3
    assert len(rep.cases) == 6


def test_l1_embedding_respects_explicit_bound():
    rep = check_inequality("l1-embedding", SMALL + [CORPUS["algebraic1"]], FAST)
    assert rep.bound == pytest.approx(np.sqrt(4 * np.pi / 3))
    assert rep.passed and rep.max_ratio <= rep.bound
    assert rep.skipped_count == 3  # algebraic1 decays like r^-2: not integrable


def test_embedding_on_grid_corpus_and_csv(tmp_path):
    u = sample_analytic(lambda r: np.exp(-r * r / 4), RadialGrid(64.0, 2048))
    rep = check_inequality("embedding", [u], FAST)
    assert rep.passed and rep.corpus == ("grid0",)
    path = tmp_path / "e.csv"
    rep.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "case_id,lhs,rhs,ratio" and len(lines) == 1 + len(rep.cases)
    assert "embedding: PASS" in rep.summary()


def test_corpus_from_grid_matches_profile():
    g = RadialGrid(32.0, 1024)
    m = corpus_from_grid(sample_analytic(lambda r: (1 + r * r) ** -1, g))
    r = np.array([0.5, 3.0, 10.0])
    np.testing.assert_allclose(m.profile(r), (1 + r * r) ** -1, rtol=1e-7)
    np.testing.assert_allclose(m.gradient(r), -2 * r / (1 + r * r) ** 2, rtol=1e-5)
    assert m.decay == pytest.approx(2.0, rel=1e-3)
    with pytest.raises(ValueError):
        corpus_from_grid(GridFunction(g, np.zeros(g.shape), "radial-vector"))


def test_power_family_rejects_negative_members():
    g = RadialGrid(16.0, 256)
    neg = sample_analytic(lambda r: -np.exp(-r * r), g)
    with pytest.raises(HypothesisError, match="w >= 0"):
        check_inequality("power", [neg], FAST)


def test_derivative_family_constant_is_one():
    rep = check_inequality("derivative", SMALL, FAST)
    assert rep.passed and rep.max_ratio <= 1.0


def test_unbounded_ratio_is_reported():
    rep = check_inequality("intermediate", SMALL, IneqParams(j_max=8, intermediate_tol=-0.9))
    assert not rep.passed and "exceeds the bound" in rep.failures[0]
