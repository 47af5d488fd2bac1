import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from insiderlab.errors import DomainError, RangeError
from insiderlab.model import PayoffSpec
from insiderlab.pricing import (FundamentalValue, PricingRule, fundamental, inverse_price, pde_residual,
                                price, price_dy, price_quadrature, tower_gap)

FAMILIES = {
    "identity": PayoffSpec("identity"),
    "affine": PayoffSpec("affine", {"a": 2.0, "b": -1.0}),
    "cubic": PayoffSpec("cubic"),
    "exponential": PayoffSpec("exponential", {"scale": 1.5, "rate": 0.7}),
    "table": PayoffSpec("table", {"x": [-2.0, -0.5, 0.5, 2.0], "f": [-1.0, -0.2, 0.4, 1.5]}),
}


def test_identity_price(rule_id, rng):
    y, t = rng.normal(size=100) * 2, rng.uniform(0, 1, 100)
    assert np.array_equal(price(rule_id, y, t), y)
    assert np.max(np.abs(price_quadrature(rule_id, y, t) - y)) <= 1e-12


def test_cubic_price_moment(rule_cubic):
    assert price(rule_cubic, 1.0, 0.0) == pytest.approx(4.0, abs=1e-14)
    assert price_quadrature(rule_cubic, 1.0, 0.0) == pytest.approx(4.0, abs=1e-12)


def test_exponential_closed_form():
    rule = PricingRule.markov(FAMILIES["exponential"])
    y, t = 0.3, 0.2
    # lognormal mean scale * exp(rate y + rate^2 rho / 2)
    assert price(rule, y, t) == pytest.approx(1.5 * np.exp(0.7 * y + 0.5 * 0.49 * 0.8), rel=1e-12)


def test_inverse_examples(rule_id, rule_cubic):
    assert inverse_price(rule_id, 0.37, 0.4) == 0.37
    assert inverse_price(rule_cubic, 8.0, 1.0) == pytest.approx(2.0, abs=1e-12)
    assert inverse_price(rule_cubic, 4.0, 0.0) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("name", list(FAMILIES))
@given(y=st.floats(-1.8, 1.8), t=st.floats(0.0, 1.0))
def test_inverse_round_trip(name, y, t):
    rule = PricingRule.markov(FAMILIES[name])
    p = price(rule, y, t)
    assert abs(price(rule, inverse_price(rule, p, t), t) - p) <= 1e-9 * max(1.0, abs(p))


@pytest.mark.parametrize("name", list(FAMILIES))
def test_price_increasing(name):
    rule = PricingRule.markov(FAMILIES[name])
    y = np.linspace(-1.9, 1.9, 77)
    for t in (0.0, 0.5, 0.9):
        assert np.all(np.diff(price(rule, y, t)) > 0)
        assert np.all(price_dy(rule, y, t) > 0)


def test_inverse_range_errors():
    with pytest.raises(RangeError):
        inverse_price(PricingRule.markov(FAMILIES["exponential"]), -1.0, 0.5)
    with pytest.raises(RangeError):
        inverse_price(PricingRule.markov(FAMILIES["table"]), 2.0, 1.0)
    with pytest.raises(DomainError):
        price(PricingRule.markov(FAMILIES["cubic"]), 0.0, 1.5)


def test_fundamental_value(S1):
    fv = FundamentalValue(PayoffSpec("identity"), S1.vol)
    z = np.linspace(-2, 2, 9)
    assert np.array_equal(fundamental(fv, z, 0.3), z)
    fc = FundamentalValue(PayoffSpec("cubic"), S1.vol)
    assert np.allclose(fundamental(fc, z, 0.5), z ** 3 + 3 * z * 0.25, atol=1e-13)
    for name, f in FAMILIES.items():
        assert np.allclose(fundamental(FundamentalValue(f, S1.vol), z, 1.0), f(z), atol=1e-14)


def test_pde_residual_identity(rule_id):
    y = np.linspace(-3, 3, 13)
    t = np.linspace(0, 0.9, 10)
    assert pde_residual(rule_id, y, t).max == 0.0


def test_pde_residual_cubic(rule_cubic):
    y = np.linspace(-3, 3, 25)
    t = np.linspace(0, 0.9, 19)
    assert pde_residual(rule_cubic, y, t).max <= 1e-6


def test_pde_residual_weighted_interior(rule_s2):
    y = np.linspace(-3, 3, 13)
    for t in (np.linspace(0.0, 0.45, 10), np.linspace(0.55, 0.95, 9)):
        assert pde_residual(rule_s2, y, t).max <= 1e-5
    with pytest.raises(DomainError):
        pde_residual(rule_s2, y, [0.5])


def test_pde_residual_exponential_quadrature():
    rule = PricingRule.markov(FAMILIES["exponential"])
    y = np.linspace(-1, 1, 5)
    assert pde_residual(rule, y, [0.1, 0.5], hy=2.0 ** -7, ht=2.0 ** -7).max <= 1e-4


@pytest.mark.parametrize("name", ["identity", "affine", "cubic", "exponential"])
def test_tower_property(name):
    rule = PricingRule.markov(FAMILIES[name])
    y = np.linspace(-2, 2, 9)
    for t, s in ((0.0, 0.5), (0.2, 0.9), (0.5, 1.0)):
        assert np.max(tower_gap(rule, y, t, s)) <= 1e-8 * max(1.0, float(np.max(np.abs(price(rule, y, t)))))


def test_tower_property_weighted(rule_s2):
    y = np.linspace(-2, 2, 9)
    for t, s in ((0.0, 0.5), (0.3, 0.8), (0.5, 1.0)):
        assert np.max(tower_gap(rule_s2, y, t, s)) <= 1e-8
