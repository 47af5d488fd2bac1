import math

import numpy as np
import pytest

from insiderlab.analysis import (BridgeSummary, bridge_convergence, bridge_error, efficiency_curves,
                                 inconspicuousness_test, metrics_report, optimality_table)
from insiderlab.dynamics import StrategySpec, equilibrium_grid, exact_bridge_ensemble, simulate_ensemble
from insiderlab.errors import DomainError
from insiderlab.pricing import PricingRule
from insiderlab.rng import normals

EQ = StrategySpec("equilibrium_markov")
PROBES = np.linspace(0, 1, 17)


@pytest.fixture(scope="module")
def s1_ensemble(S1, rule_id):
    g = equilibrium_grid(S1, rule_id, 2048, extra=PROBES[1:-1])
    nodes = [g.index_of(x) for x in PROBES]
    strats = [EQ, StrategySpec("zero"), StrategySpec("jump_at", time=0.5, size=1.0),
              StrategySpec("diffusive", kappa=0.5)]
    return simulate_ensemble(S1, rule_id, strats, g, 10000, 31, record=nodes)


def test_brownian_calibration():
    n = 4000
    dB = normals(5, np.arange(n), np.arange(16))[:, :, 0] / 4.0
    Y = np.concatenate([np.zeros((n, 1)), np.cumsum(dB, axis=1)], axis=1)
    assert inconspicuousness_test(Y, PROBES).passed


def test_inconspicuousness_by_strategy(s1_ensemble):
    t = PROBES
    rep = {lab: inconspicuousness_test(s1_ensemble.field("Y", j), t) for j, lab in enumerate(s1_ensemble.labels)}
    assert rep["equilibrium_markov"].passed
    assert rep["zero"].passed
    jump = rep["jump_at(0.5,1)"]
    assert not jump.passed
    # the interval ending at the jump node carries the mean shift
    assert jump.ks_p[7] < 1e-6
    assert not rep["diffusive(0.5)"].variance_ok


def test_inconspicuousness_input_checks():
    with pytest.raises(DomainError):
        inconspicuousness_test(np.zeros((10, 17)), PROBES)


def test_bridge_error_summary():
    s = bridge_error(np.array([[0.1, -0.2], [-0.3, 0.4]]), [0.5, 1.0])
    assert s.mean == pytest.approx([0.2, 0.3])
    assert s.max == pytest.approx([0.3, 0.4])


def test_bridge_convergence_ratios():
    mk = lambda e: BridgeSummary([1.0], 10, [e], [e], [e], [e])
    c = bridge_convergence([2 ** 10, 2 ** 12], [mk(4e-4), mk(1e-4)])
    assert c.ratios == [[pytest.approx(0.25)]]
    assert c.monotone == [True]
    assert c.slope[0][0] == pytest.approx(-1.0)


def test_exact_bridge_error_zero(S1):
    g = equilibrium_grid(S1, PricingRule.markov(S1.payoff), 128)
    ens = exact_bridge_ensemble(S1, g, 100, 0)
    assert np.all(bridge_error(ens.gaps[:, :, 0], [1.0]).max == [0.0])


def test_efficiency_s1(S1, rule_id):
    ins, base = efficiency_curves(S1, rule_id, 4000, [0.0, 0.5, 0.9, 0.99], m=2048)
    # at t = 0 nothing has traded: both errors are Var(v) = sigma^2
    assert ins.mse[0] == base.mse[0] == pytest.approx(0.5, abs=4 * ins.stderr[0])
    assert ins.mse[3] <= 0.05
    # without the insider Z_t and B_t are independent: sigma^2 + Sigma_z(t) + t
    expect = 0.5 + 0.5 * 0.99 + 0.99
    assert abs(base.mse[3] - expect) < 4 * base.stderr[3]
    assert ins.mse[1] > ins.mse[2] > ins.mse[3]


def test_optimality_table_s1(S1, rule_id):
    strats = [EQ, StrategySpec("target_chasing"), StrategySpec("zero"), StrategySpec("jump_at")]
    tab = optimality_table(S1, rule_id, strats, 4000, m=4096, base_seed=3)
    assert tab.bound == pytest.approx(1.0, abs=1e-12)
    eq, tc = tab.row("equilibrium_markov"), tab.row("target_chasing")
    assert abs(eq.shortfall_se) < 3 and abs(tc.shortfall_se) < 3
    assert abs(eq.mean - tc.mean) < 3 * math.hypot(eq.stderr, tc.stderr)
    assert tab.row("zero").shortfall_se > 3 and tab.row("jump_at(0.5,1)").shortfall_se > 3
    assert tab.violations == []


def test_optimality_table_empty(S1, rule_id):
    tab = optimality_table(S1, rule_id, [], 100)
    assert tab.rows == [] and tab.bound == pytest.approx(1.0)


def test_metrics_report_s2(S2, rule_s2):
    rep = metrics_report("S2", S2, rule_s2, 2000, 1024, 4, strategies=[StrategySpec("zero")])
    d = rep.to_dict()
    assert d["bridge"]["targets"] == [0.5, 1.0]
    assert max(d["bridge"]["mean"]) < 0.03
    assert d["inconspicuousness"]["equilibrium_nonmarkov"]["passed"]
    a1, a2 = math.sqrt(0.7), math.sqrt(1.3)
    # prior-averaged gaps (sigma^2 + Sigma_z + G) / 2 at each horizon
    bound = (1 / a1 - 1 / a2) * 0.5 * (0.1 + 0.25 + 0.35) + 0.5 * (0.1 + 0.9 + 1.0) / a2
    assert d["optimality"]["bound"] == pytest.approx(bound, abs=1e-12)
