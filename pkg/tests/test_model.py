import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from insiderlab.errors import ConstructionError, DomainError, SingularityError
from insiderlab.model import (FAIL, PASS, ModelParams, PayoffSpec, VolatilitySpec, WeightingFunction,
                              check_assumptions, check_nonmarkovian_conditions, construct_weighting,
                              cumulative_variance, lambda_of_t, limit_condition_samples,
                              markov_denominator, nonmarkov_denominator, xi_of_t)
from insiderlab.quadrature import classify_improper, gauss_hermite, gauss_legendre
from insiderlab.scenarios import S2_PARTITION


# ---------------------------------------------------------------- quadrature

def test_gauss_hermite_normal_moments():
    x, w = gauss_hermite(64)
    assert math.isclose(np.sum(w), 1.0, abs_tol=1e-14)
    assert abs(np.sum(w * x)) < 1e-14
    assert math.isclose(np.sum(w * x ** 2), 1.0, abs_tol=1e-13)
    assert math.isclose(np.sum(w * x ** 4), 3.0, abs_tol=1e-12)


def test_gauss_legendre_unit_interval():
    x, w = gauss_legendre(16)
    assert math.isclose(np.sum(w * x ** 5), 1 / 6, rel_tol=1e-14)


def test_classify_improper():
    assert classify_improper(lambda s: 1.0 / (1.0 - s), 0.0, 1.0).divergent
    assert classify_improper(lambda s: (1.0 - s) ** -2, 0.0, 1.0).divergent
    r = classify_improper(lambda s: (1.0 - s) ** -0.5, 0.0, 1.0)
    assert not r.divergent and abs(r.value - 2.0) < 1e-6


# ---------------------------------------------------------------- volatility

def test_cumulative_variance_examples(S2):
    assert cumulative_variance(VolatilitySpec.constant(0.0), 0.7) == 0.0
    assert math.isclose(cumulative_variance(VolatilitySpec.constant(0.5), 0.5), 0.25)
    assert math.isclose(cumulative_variance(S2.vol, 1.0), 0.9, rel_tol=1e-14)
    assert math.isclose(cumulative_variance(S2.vol, 0.5), 0.25, rel_tol=1e-14)


def test_volatility_jump_sides(S2):
    assert S2.vol.sigma_z2(0.5, "left") == pytest.approx(0.4)
    assert S2.vol.sigma_z2(0.5, "right") == pytest.approx(1.4)
    assert S2.vol.jump_times == (0.5,)


@pytest.mark.parametrize("knots", [
    [(0.0, 1.0)],
    [(0.1, 1.0), (1.0, 1.0)],
    [(0.0, 1.0), (0.5, 1.0), (0.5, 2.0), (0.5, 3.0), (1.0, 1.0)],
    [(0.0, -0.1), (1.0, 0.0)],
])
def test_volatility_rejects_bad_knots(knots):
    with pytest.raises(DomainError):
        VolatilitySpec(knots)


def test_normalization_enforced():
    with pytest.raises(DomainError):
        ModelParams(1.0, VolatilitySpec.constant(0.5))
    with pytest.raises(DomainError):
        ModelParams.normalized(VolatilitySpec.constant(1.5))


# ---------------------------------------------------------------- denominators

def test_markov_denominator_examples(S0, S1, S2):
    assert markov_denominator(S0, 0.3) == pytest.approx(0.7, abs=1e-15)
    assert markov_denominator(S1, 0.5) == pytest.approx(0.25, abs=1e-15)
    for p in (S0, S1, S2):
        assert abs(markov_denominator(p, 1.0)) < 1e-15
    # direct evaluation 0.25 + 0.1 - 0.5
    assert markov_denominator(S2, 0.5) == pytest.approx(-0.15, abs=1e-14)


def test_lambda_examples(S0, S1, S2):
    assert lambda_of_t(S0, 0.75) == pytest.approx(0.25, rel=1e-10)
    assert lambda_of_t(S1, 0.5) == pytest.approx(0.25, rel=1e-10)
    assert lambda_of_t(S1, 0.0) == 1.0
    with pytest.raises(SingularityError):
        lambda_of_t(S2, 0.6)


def test_xi_examples(S0, S1):
    assert xi_of_t(S0, 0.0) == 0.0
    assert xi_of_t(S0, 0.5) == pytest.approx(1.0, rel=1e-10)
    assert xi_of_t(S1, 0.5) == pytest.approx(3.5, rel=1e-10)


@given(st.floats(0.0, 0.99))
def test_xi_closed_form_s1(t):
    from insiderlab.scenarios import s1
    assert xi_of_t(s1(), t) == pytest.approx(0.5 * ((1 - t) ** -3 - 1), rel=1e-9, abs=1e-14)


@given(st.floats(0.05, 0.95), st.floats(0.0, 0.999))
def test_lambda_closed_form_constant_vol(c, t):
    p = ModelParams.normalized(VolatilitySpec.constant(c))
    assert lambda_of_t(p, t) == pytest.approx((1 - t) ** (1 / (1 - c)), rel=1e-9, abs=1e-300)


# ---------------------------------------------------------------- assumptions

def test_s0_assumptions(S0):
    rep = check_assumptions(S0)
    assert rep.all_pass
    assert rep.square_integrable_to_one == FAIL
    assert rep.reciprocal_diverges == PASS
    assert rep.limit_condition == PASS


def test_s1_limit_condition(S1):
    rep = check_assumptions(S1)
    assert rep.all_pass
    vals = [s["value"] for s in limit_condition_samples(S1, 4, 20)]
    assert vals[-1] < 1e-3
    assert np.all(np.diff(vals[-5:]) < 0)


def test_s2_markov_check_fails(S2):
    rep = check_assumptions(S2)
    assert rep.assumption_32 == FAIL
    assert "assumption_3.2" in rep.failed
    assert rep.denominator_min == pytest.approx(-0.15, abs=1e-12)
    assert rep.denominator_argmin == pytest.approx(0.5)


def test_payoff_checks():
    p = ModelParams.normalized(VolatilitySpec.constant(0.5), PayoffSpec("cubic"))
    assert check_assumptions(p).assumption_21 == PASS
    with pytest.raises(DomainError):
        PayoffSpec("table", {"x": [0, 1], "f": [1, 0]})
    with pytest.raises(DomainError):
        PayoffSpec("affine", {"a": -1})


@pytest.mark.parametrize("spec", [
    PayoffSpec("identity"), PayoffSpec("affine", {"a": 2.0, "b": 1.0}), PayoffSpec("cubic"),
    PayoffSpec("exponential", {"scale": 1.0, "rate": 0.5}),
    PayoffSpec("table", {"x": [-2, 0, 1, 3], "f": [-1, 0, 2, 2.5]}),
])
def test_payoff_antiderivative_and_derivative(spec):
    x = np.linspace(-3.5, 3.5, 29) + 0.0123   # stay off table kinks
    h = 1e-5
    fd = (spec.antiderivative(x + h) - spec.antiderivative(x - h)) / (2 * h)
    assert np.max(np.abs(fd - spec(x))) < 1e-6
    fd2 = (spec(x + h) - spec(x - h)) / (2 * h)
    assert np.max(np.abs(fd2 - spec.derivative(x))) < 1e-5 * max(1.0, np.max(np.abs(fd2)))


# ---------------------------------------------------------------- weighting

def test_construct_weighting_s2(S2):
    w = construct_weighting(S2, S2_PARTITION)
    assert w.weights == pytest.approx([math.sqrt(0.7), math.sqrt(1.3)], rel=1e-14)


def test_construct_weighting_s0(S0):
    w = construct_weighting(S0, [0.0, 1.0])
    assert w.weights == pytest.approx([1.0], rel=1e-14)


def test_construct_weighting_equal_slopes():
    vol = VolatilitySpec([(0.0, 0.0), (1.0, 1.8)])
    p = ModelParams(math.sqrt(0.1), vol)
    with pytest.raises(ConstructionError) as ei:
        construct_weighting(p, [0.0, 1 / 9, 1.0])
    assert ei.value.indices == (2,)


def test_s2_conditions(S2, w2):
    rep = check_nonmarkovian_conditions(S2, w2)
    assert rep.all_pass
    assert max(abs(r) for r in rep.residuals) < 1e-12
    # the denominator on the first interval is 0.1 - 0.1 t - 0.2 t^2
    D = nonmarkov_denominator(S2, w2)
    t = np.linspace(0.0, 0.5, 11)
    assert np.allclose(D(t, "left"), 0.1 - 0.1 * t - 0.2 * t ** 2, atol=1e-14)
    # and u (0.1 - 0.2 u) on the second, with u = t - 0.5
    u = np.linspace(0.01, 0.5, 11)
    assert np.allclose(D(0.5 + u), u * (0.1 - 0.2 * u), atol=1e-14)


def test_s2_unit_weight_fails_positivity(S2):
    rep = check_nonmarkovian_conditions(S2, WeightingFunction.markov())
    assert rep.interior_positive == FAIL
    assert "condition_4.9" in rep.failed


def test_s0_unit_weight_passes(S0):
    assert check_nonmarkovian_conditions(S0, WeightingFunction.markov()).all_pass


def test_weighting_half_open_intervals(w2):
    assert w2(0.5) == w2.weights[0]
    assert w2(0.5 + 1e-12) == w2.weights[1]
    assert w2(0.0) == w2.weights[0]
    assert w2.rho(0.0) == pytest.approx(0.5 * 0.7 + 0.5 * 1.3)


@given(st.lists(st.floats(0.05, 3.0), min_size=1, max_size=5))
def test_weighting_G_matches_sum(ws):
    n = len(ws)
    p = np.linspace(0.0, 1.0, n + 1)
    w = WeightingFunction(p, ws)
    assert w.G(1.0) == pytest.approx(sum(a * a for a in ws) / n, rel=1e-12)
