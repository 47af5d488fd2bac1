"""Acceptance criteria at their stated sample sizes and tolerances.

Each test records a one-line verdict that is printed in the terminal
summary, then asserts it.
"""

import math
import os
import time

import numpy as np
import pytest

from conftest import record
from insiderlab.analysis import (bridge_error, efficiency_curves, inconspicuousness_test,
                                 optimality_table)
from insiderlab.dynamics import (StrategySpec, TimeGrid, equilibrium_grid, exact_bridge_ensemble,
                                 monte_carlo, monte_carlo_many, simulate_ensemble)
from insiderlab.filtering import gamma_ode_solve, kalman_filter
from insiderlab.model import (PASS, PayoffSpec, check_assumptions, check_nonmarkovian_conditions,
                              construct_weighting, limit_condition_samples)
from insiderlab.pricing import PricingRule, pde_residual, tower_gap
from insiderlab.scenarios import S2_PARTITION, s0, s1, s2
from insiderlab.value import ValueFunction, profit_upper_bound, value_pde_residual, value_V_nonmarkov

SEED = 42
EQ = StrategySpec("equilibrium_markov")
SUB = [StrategySpec("zero"), StrategySpec("jump_at", time=0.5, size=1.0), StrategySpec("diffusive", kappa=0.5)]
SCEN = {"S0": s0, "S1": s1}
PROBES = np.linspace(0.0, 1.0, 17)


def _markov(p):
    return PricingRule.markov(p.payoff)


@pytest.fixture(scope="module")
def profit_runs():
    """10^5 paths on the 2^14-node geometric grid, all strategies sharing draws."""
    out = {}
    for name, mk in SCEN.items():
        p = mk()
        rule = _markov(p)
        t0 = time.perf_counter()
        tab = optimality_table(p, rule, [EQ] + SUB, 10 ** 5, base_seed=SEED, m=2 ** 14,
                               workers=os.cpu_count() or 1)
        out[name] = (tab, time.perf_counter() - t0)
    return out


def test_01_profit_attainment(profit_runs):
    ok, parts = True, []
    for name, (tab, secs) in profit_runs.items():
        r = tab.row(EQ.label)
        z = (r.mean - 1.0) / r.stderr
        ok &= abs(z) <= 3 and tab.bound == pytest.approx(1.0, abs=1e-12)
        parts.append(f"{name} mean {r.mean:.4f} se {r.stderr:.4f} z {z:+.2f} ({secs:.0f}s)")
    assert record("1 profit attainment", ok, "; ".join(parts))


def test_02_strict_suboptimality(profit_runs):
    ok, parts = True, []
    for name, (tab, _) in profit_runs.items():
        eq = tab.row(EQ.label)
        for s in SUB:
            r = tab.row(s.label)
            joint = math.hypot(r.stderr, eq.stderr)
            short = (1.0 - r.mean) / joint
            ok &= short >= 3
            parts.append(f"{name} {s.label} {short:.1f}se")
    assert record("2 strict suboptimality", ok, ", ".join(parts))


def test_03_bridge_property():
    ok, parts = True, []
    for name, mk in SCEN.items():
        p = mk()
        rule = _markov(p)
        errs = []
        for m in (2 ** 10, 2 ** 12, 2 ** 14):
            st = monte_carlo(p, rule, EQ, equilibrium_grid(p, rule, m), 10 ** 4, SEED)
            errs.append(st.bridge_mean_abs[0])
        ratios = [b / a for a, b in zip(errs, errs[1:])]
        ok &= all(r <= 0.7 for r in ratios) and errs[-1] <= 0.03
        # exact representation: pinned terminal node, N(0, t) at 16 interior probes
        g = equilibrium_grid(p, rule, 2 ** 12, extra=PROBES[1:-1])
        nodes = [g.index_of(x) for x in PROBES[1:]]
        ens = exact_bridge_ensemble(p, g, 10 ** 4, SEED, record=nodes)
        Y = ens.field("Y", 0)
        pinned = float(np.max(np.abs(ens.gaps)))
        t = PROBES[1:]
        var = Y.var(axis=0, ddof=1)
        z = (var - t) / (t * math.sqrt(2.0 / (len(Y) - 1)))
        ok &= pinned == 0.0 and np.all(np.abs(z) <= 3)
        parts.append(f"{name} errors {', '.join(f'{e:.2e}' for e in errs)} ratios "
                     f"{', '.join(f'{r:.2f}' for r in ratios)}; exact gap {pinned:g}, max|z| {np.max(np.abs(z)):.2f}")
    assert record("3 bridge property", ok, "; ".join(parts))


def test_04_inconspicuousness():
    ok, parts = True, []
    for name, mk in SCEN.items():
        p = mk()
        rule = _markov(p)
        g = equilibrium_grid(p, rule, 2 ** 12, extra=PROBES[1:-1])
        nodes = [g.index_of(x) for x in PROBES]
        ens = simulate_ensemble(p, rule, [EQ] + SUB[1:], g, 10 ** 4, SEED, record=nodes)
        verdict = {lab: inconspicuousness_test(ens.field("Y", j), PROBES).passed
                   for j, lab in enumerate(ens.labels)}
        ok &= verdict[EQ.label] and not verdict[SUB[1].label] and not verdict[SUB[2].label]
        parts.append(f"{name} " + ", ".join(f"{k} {'pass' if v else 'fail'}" for k, v in verdict.items()))
    assert record("4 inconspicuousness", ok, "; ".join(parts))


def test_05_filtering_identity():
    ok, parts = True, []
    for name, mk in SCEN.items():
        p = mk()
        rule = _markov(p)
        g = TimeGrid.uniform(2 ** 12)
        gp = gamma_ode_solve(p, g)
        sel = gp.t <= 0.9
        gerr = float(np.max(np.abs(gp.gamma[sel] - p.D(gp.t[sel]))))
        ens = simulate_ensemble(p, rule, [EQ], g, 100, SEED, record="all")
        Y = ens.field("Y", 0)
        res = kalman_filter(p, Y, g, gamma=gp)
        merr = float(np.max(np.abs(res.m[:, sel] - Y[:, : len(res.t)][:, sel])))
        ok &= gerr <= 1e-8 and merr <= 0.02
        parts.append(f"{name} gamma err {gerr:.1e}, max|m-Y| {merr:.1e}")
    assert record("5 filtering identity", ok, "; ".join(parts))


def test_06_pricing_pde():
    y = np.linspace(-3, 3, 61)
    t = np.linspace(0, 0.9, 91)
    r_id = pde_residual(PricingRule.markov(PayoffSpec("identity")), y, t).max
    # machine level: one ulp of H carried through the second difference
    floor = np.finfo(float).eps * 3.0 / (2.0 ** -10) ** 2
    r_cu = pde_residual(PricingRule.markov(PayoffSpec("cubic")), y, t).max
    gap = 0.0
    for f in (PayoffSpec("identity"), PayoffSpec("cubic"), PayoffSpec("exponential", {"scale": 1.0, "rate": 0.5})):
        rule = PricingRule.markov(f)
        for a, b in ((0.0, 0.5), (0.3, 0.9), (0.5, 1.0)):
            yy = np.linspace(-2, 2, 21)
            scale = max(1.0, float(np.max(np.abs(rule.payoff(yy)))))
            gap = max(gap, float(np.max(tower_gap(rule, yy, a, b))) / scale)
    ok = r_id <= floor and r_cu <= 1e-6 and gap <= 1e-8
    assert record("6 pricing PDE", ok, f"identity {r_id:.1e} (rounding floor {floor:.1e}), "
                                       f"cubic {r_cu:.1e}, tower {gap:.1e}")


def test_07_value_identities():
    p = s1()
    g = np.linspace(-2, 2, 9)
    t = [0.0, 0.3, 0.6, 0.9 - 2 ** -6]
    r = value_pde_residual(ValueFunction(_markov(p), p), g, g, t)
    id_res = max(r.hjb_max, r.gradient_max)
    pc = s1(PayoffSpec("cubic"))
    vf = ValueFunction(_markov(pc), pc)
    g5 = np.linspace(-2, 2, 5)
    res = [value_pde_residual(vf, g5, g5, t, h=h) for h in (2 ** -7, 2 ** -8, 2 ** -9)]
    hjb = [x.hjb_max for x in res]
    grad = [x.gradient_max for x in res]
    decay = all(a / b > 3 for a, b in zip(hjb, hjb[1:])) and all(a / b > 3 for a, b in zip(grad, grad[1:]))
    ok = id_res <= 1e-8 and max(hjb[1], grad[1]) <= 1e-4 and decay
    assert record("7 value identities", ok,
                  f"identity {id_res:.1e}; cubic hjb {', '.join(f'{x:.1e}' for x in hjb)}, "
                  f"gradient {', '.join(f'{x:.1e}' for x in grad)}")


def test_08_nonmarkov_equilibrium():
    p = s2()
    w = construct_weighting(p, S2_PARTITION)
    rule = PricingRule.weighted(p.payoff, w)
    cond = check_nonmarkovian_conditions(p, w)
    conds_ok = all(cond.verdicts[k] == PASS for k in
                   ("condition_4.9", "condition_4.10", "condition_4.11", "condition_4.12"))
    mk = check_assumptions(p)
    reject = (mk.assumption_32 != PASS and abs(mk.denominator_min + 0.15) < 1e-12
              and abs(mk.denominator_argmin - 0.5) < 1e-12)
    weights_ok = np.allclose(w.weights, [math.sqrt(0.7), math.sqrt(1.3)], rtol=1e-14)
    eq = StrategySpec("equilibrium_nonmarkov", weighting=w)
    stats, _ = monte_carlo_many(p, rule, [eq], equilibrium_grid(p, rule, 2 ** 14), 10 ** 4, SEED)
    st = stats[eq.label]
    gaps_ok = max(st.bridge_mean_abs) <= 0.03
    bound = profit_upper_bound(ValueFunction(rule, p))
    v000 = value_V_nonmarkov(rule, p, w, 0.0, 0.0, 0.0)
    z = (st.mean - bound) / st.stderr
    z_lit = (st.mean - v000) / st.stderr
    ok = conds_ok and reject and weights_ok and gaps_ok and abs(z) <= 3
    assert record("8 non-Markov equilibrium", ok,
                  f"conditions {'pass' if conds_ok else 'fail'}, Markov check rejects at 0.5 with "
                  f"{mk.denominator_min:.2f}; gaps {st.bridge_mean_abs[0]:.1e}, {st.bridge_mean_abs[1]:.1e}; "
                  f"profit {st.mean:.4f} se {st.stderr:.4f} vs prior-averaged value {bound:.5f} (z {z:+.2f}); "
                  f"value at z=0 {v000:.5f} (z {z_lit:+.2f})")


def test_09_informational_efficiency():
    ok, parts = True, []
    for name, mk in SCEN.items():
        p = mk()
        ins, base = efficiency_curves(p, _markov(p), 10 ** 4, [0.99], m=2 ** 12, base_seed=SEED)
        joint = math.hypot(ins.stderr[0], base.stderr[0])
        gap = (base.mse[0] - ins.mse[0]) / joint
        # without the insider the error is sigma^2 + Sigma_z(t) + t in closed form
        anchor = p.sigma2 + float(p.vol.Sigma(0.99)) + 0.99
        ok &= gap >= 3
        parts.append(f"{name} with {ins.mse[0]:.4f}, without {base.mse[0]:.3f} "
                     f"(closed form {anchor:.3f}), {gap:.0f}se")
    assert record("9 informational efficiency", ok, "; ".join(parts))


def _eventually_decreasing(vals):
    j = len(vals) - 1
    while j > 0 and vals[j] < vals[j - 1]:
        j -= 1
    return len(vals) - j >= 3


def test_10_limit_condition():
    ok, parts = True, []
    for name, mk in SCEN.items():
        vals = [s["value"] for s in limit_condition_samples(mk(), 4, 20)]
        good = _eventually_decreasing(vals) and vals[-1] < 1e-3
        ok &= good
        parts.append(f"{name} last {vals[-1]:.1e}")
    assert record("10 limit condition", ok, "; ".join(parts))


def test_11_determinism():
    ok = True
    p = s2()
    w = construct_weighting(p, S2_PARTITION)
    rule = PricingRule.weighted(p.payoff, w)
    strats = [StrategySpec("equilibrium_nonmarkov", weighting=w), StrategySpec("diffusive")]
    g = equilibrium_grid(p, rule, 2 ** 12)
    runs = [simulate_ensemble(p, rule, strats, g, 4000, SEED, record=[0, 2048, 4096], workers=k, batch=b)
            for k, b in ((1, 2048), (1, 2048), (4, 333))]
    for r in runs[1:]:
        for f in ("wealth", "qv", "gaps", "rec", "recz", "v"):
            ok &= getattr(r, f).tobytes() == getattr(runs[0], f).tobytes()
    p1 = s1()
    g1 = equilibrium_grid(p1, _markov(p1), 2 ** 12)
    a = exact_bridge_ensemble(p1, g1, 3000, SEED, record="all")
    b = exact_bridge_ensemble(p1, g1, 3000, SEED, record="all", workers=3, batch=500)
    ok &= a.rec.tobytes() == b.rec.tobytes()
    assert record("11 determinism", ok, "Euler and exact ensembles byte-identical across reruns, "
                                        "worker counts and batch sizes")
