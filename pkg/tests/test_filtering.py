import math

import numpy as np
import pytest

from insiderlab.dynamics import StrategySpec, TimeGrid, equilibrium_grid, simulate_ensemble, simulate_path
from insiderlab.errors import DomainError
from insiderlab.filtering import FilterState, gamma_ode_solve, innovations_whiteness, kalman_filter
from insiderlab.rng import normals

EQ = StrategySpec("equilibrium_markov")


def test_gamma_initial_and_closed_forms(S0, S1):
    g = TimeGrid.uniform(4096)
    for p in (S0, S1):
        gp = gamma_ode_solve(p, g)
        assert gp.gamma[0] == p.sigma2
        sel = gp.t <= 0.9
        assert np.max(np.abs(gp.gamma[sel] - p.D(gp.t[sel]))) <= 1e-8
    gp = gamma_ode_solve(S1, g)
    assert gp.gamma[g.index_of(0.5)] == pytest.approx(0.25, abs=1e-8)
    gp = gamma_ode_solve(S0, TimeGrid.uniform(1000))
    assert gp.gamma[900] == pytest.approx(0.1, abs=1e-8)


def test_gamma_weighted_first_interval(S2, w2):
    g = TimeGrid.uniform(4096)
    gp = gamma_ode_solve(S2, g, w2)
    t = gp.t
    sel = (t <= 0.5 - 2 ** -10) & np.isfinite(gp.gamma)
    oracle = S2.vol.Sigma(t[sel]) + 0.1 - 0.7 * t[sel]
    assert np.max(np.abs(gp.gamma[sel] - oracle)) <= 1e-8
    assert gp.max_error <= 1e-8


def test_kalman_mean_tracks_y(S1, rule_id):
    g = TimeGrid.uniform(4096)
    b = simulate_path(S1, rule_id, EQ, g, seed=17)
    res = kalman_filter(S1, b.Y, g)
    sel = res.t <= 0.9
    assert np.max(np.abs(res.m[sel] - b.Y[: len(res.t)][sel])) <= 0.02


def test_kalman_zero_strategy_martingale(S1, rule_id):
    g = TimeGrid.uniform(256)
    ens = simulate_ensemble(S1, rule_id, [StrategySpec("zero")], g, 10000, 2, record="all")
    res = kalman_filter(S1, ens.field("Y", 0), g)
    for k in np.linspace(16, len(res.t) - 1, 15).astype(int):
        m = res.m[:, k]
        assert abs(m.mean()) < 3 * m.std(ddof=1) / math.sqrt(len(m))


def test_whiteness_calibration():
    n, steps = 400, 1024
    ds = np.full(steps, 1.0 / steps)
    e = normals(99, np.arange(n), np.arange(steps))[:, :, 0] * np.sqrt(ds)
    rep = innovations_whiteness(e, ds)
    assert rep.pass_rate >= 0.95


def test_whiteness_equilibrium_and_diffusive(S1, rule_id):
    g = equilibrium_grid(S1, rule_id, 2048)
    ens = simulate_ensemble(S1, rule_id, [EQ, StrategySpec("diffusive", kappa=0.5)], g, 2000, 6,
                            record="all")
    eq = kalman_filter(S1, ens.field("Y", 0), g)
    rep = innovations_whiteness(eq.innovations, eq.dt, stiffness=eq.stiffness)
    assert rep.pass_rate >= 0.97
    df = kalman_filter(S1, ens.field("Y", 1), g)
    rep = innovations_whiteness(df.innovations, df.dt, stiffness=df.stiffness)
    assert rep.variance_ok.mean() < 0.05


def test_whiteness_weighted(S2, rule_s2, w2):
    g = equilibrium_grid(S2, rule_s2, 2048)
    ens = simulate_ensemble(S2, rule_s2, [StrategySpec("equilibrium_nonmarkov", weighting=w2)], g, 1000, 6,
                            record="all")
    res = kalman_filter(S2, ens.field("Y", 0), g, w2)
    rep = innovations_whiteness(res.innovations, res.dt, stiffness=res.stiffness)
    assert rep.pass_rate >= 0.97


def test_filter_state_validation():
    FilterState(0.0, 0.0)
    with pytest.raises(DomainError):
        FilterState(0.0, -1e-3)


def test_kalman_shape_check(S1):
    with pytest.raises(DomainError):
        kalman_filter(S1, np.zeros(10), TimeGrid.uniform(16))
