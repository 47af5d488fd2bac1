"""Statistical checks of the equilibrium: invisibility of the insider, the
bridge at breakpoints, pricing efficiency and the profit table."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .dynamics import StrategySpec, TimeGrid, equilibrium_grid, simulate_ensemble, ensemble_stats
from .errors import DomainError
from .model import ModelParams
from .pricing import PricingRule, gaussian_smooth
from .value import ValueFunction, profit_upper_bound


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


# ---------------------------------------------------------------- invisibility

@dataclass
class InconspicuousnessReport:
    level: float
    n_paths: int
    times: list
    variance_ratio: list        # sample increment variance / interval length, per interval
    variance_p: list
    ks_stat: list
    ks_p: list
    pooled_ks_stat: float
    pooled_ks_p: float
    lag1: float
    lag1_bound: float
    variance_ok: bool
    ks_ok: bool
    pooled_ks_ok: bool
    lag1_ok: bool

    @property
    def passed(self):
        return self.variance_ok and self.ks_ok and self.pooled_ks_ok and self.lag1_ok

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return _clean(d)


def inconspicuousness_test(Y, times, level: float = 0.99) -> InconspicuousnessReport:
    """Tests that the order flow Y, sampled at ``times``, has Brownian increments.

    Y has shape (paths, len(times)). The family-wise level is split three ways
    between the chi-square variance band, the per-interval KS tests and the
    pooled KS test, each Bonferroni-corrected over intervals; the lag-1
    correlation of consecutive normalized increments must lie within
    3 / sqrt(paths * intervals).
    """
    Y = np.asarray(Y, dtype=float)
    t = np.asarray(times, dtype=float)
    if Y.ndim != 2 or Y.shape[1] != len(t) or len(t) < 3:
        raise DomainError("Y must be (paths, times) with at least three times")
    n = Y.shape[0]
    if n < 1000:
        raise DomainError("need at least 1000 paths")
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise DomainError("times must increase")
    k = len(dt)
    alpha = (1.0 - level) / 3.0
    z = np.diff(Y, axis=1) / np.sqrt(dt)
    ss = np.sum(z * z, axis=0)
    cdf = stats.chi2.cdf(ss, n)
    var_p = 2.0 * np.minimum(cdf, stats.chi2.sf(ss, n))
    ks = [stats.kstest(z[:, j], "norm") for j in range(k)]
    ks_stat = np.array([r.statistic for r in ks])
    ks_p = np.array([r.pvalue for r in ks])
    pooled = stats.kstest(z.ravel(), "norm")
    a, b = z[:, :-1].ravel(), z[:, 1:].ravel()
    lag1 = float(np.corrcoef(a, b)[0, 1])
    bound = 3.0 / math.sqrt(n * k)
    return InconspicuousnessReport(
        level, n, t.tolist(), (ss / n).tolist(), var_p.tolist(), ks_stat.tolist(), ks_p.tolist(),
        float(pooled.statistic), float(pooled.pvalue), lag1, bound,
        bool(np.all(var_p >= alpha / k)), bool(np.all(ks_p >= alpha / k)),
        bool(pooled.pvalue >= alpha), bool(abs(lag1) <= bound))


# ---------------------------------------------------------------- bridge

@dataclass
class BridgeSummary:
    targets: list
    n_paths: int
    mean: list
    q50: list
    q95: list
    max: list

    def to_dict(self):
        return _clean(asdict(self))


def bridge_error(gaps, targets) -> BridgeSummary:
    """Summary of |Y - Z| (or |xi - Z|) at each target time; gaps is (paths, targets)."""
    g = np.abs(np.asarray(gaps, dtype=float))
    if g.ndim == 1:
        g = g[:, None]
    if g.shape[1] != len(targets):
        raise DomainError("one gap column per target")
    return BridgeSummary([float(x) for x in targets], g.shape[0], g.mean(axis=0).tolist(),
                         np.quantile(g, 0.5, axis=0).tolist(), np.quantile(g, 0.95, axis=0).tolist(),
                         g.max(axis=0).tolist())


@dataclass
class BridgeConvergence:
    sizes: list
    summaries: list
    ratios: list            # mean error ratio per refinement, per target
    monotone: list
    slope: list             # log2 error decay per doubling of the grid size

    def to_dict(self):
        d = asdict(self)
        d["summaries"] = [s.to_dict() for s in self.summaries]
        return _clean(d)


def bridge_convergence(sizes, summaries) -> BridgeConvergence:
    """Refinement ratios of the mean bridge error across increasing grid sizes."""
    sizes = [int(m) for m in sizes]
    if len(sizes) != len(summaries) or len(sizes) < 2:
        raise DomainError("need at least two grid sizes with one summary each")
    M = np.array([s.mean for s in summaries])           # (sizes, targets)
    ratios = M[1:] / M[:-1]
    doublings = np.log2(np.array(sizes[1:]) / np.array(sizes[:-1]))
    slope = np.log2(ratios) / doublings[:, None]
    return BridgeConvergence(sizes, list(summaries), ratios.T.tolist(),
                             np.all(ratios < 1, axis=0).tolist(), slope.T.tolist())


def bridge_study(params, rule, strategy, sizes, n_paths, base_seed, workers=1):
    """Euler runs at each grid size, summarized at every breakpoint."""
    out = []
    for m in sizes:
        grid = equilibrium_grid(params, rule, m)
        ens = simulate_ensemble(params, rule, [strategy], grid, n_paths, base_seed, workers=workers)
        out.append(bridge_error(ens.gaps[:, :, 0], ens.breakpoints))
    return bridge_convergence(sizes, out)


# ---------------------------------------------------------------- efficiency

@dataclass
class EfficiencyCurve:
    with_insider: bool
    t: list
    mse: list
    stderr: list
    n_paths: int

    def to_dict(self):
        return _clean(asdict(self))


def _insider_variant(rule: PricingRule):
    return "equilibrium_markov" if rule.is_markov else "equilibrium_nonmarkov"


def efficiency_curves(params: ModelParams, rule: PricingRule, n_paths: int, probe_times,
                      m: int = 2 ** 12, base_seed: int = 0, workers=1):
    """E[(F(Z_t, t) - P_t)^2] at the probe times, with and without the insider.

    Both cases share every random draw; without the insider theta is 0 and the
    same pricing rule is applied to the noise orders alone.
    """
    probe = np.asarray(probe_times, dtype=float)
    if np.any(probe < 0) or np.any(probe >= 1):
        raise DomainError("probe times must lie in [0, 1)")
    grid = equilibrium_grid(params, rule, m, extra=probe)
    nodes = [grid.index_of(float(x)) for x in probe]
    strategies = [StrategySpec(_insider_variant(rule), weighting=rule.weighting), StrategySpec("zero")]
    ens = simulate_ensemble(params, rule, strategies, grid, n_paths, base_seed, record=nodes,
                            workers=workers)
    pos = {int(k): i for i, k in enumerate(ens.rec_nodes)}
    S = params.vol.Sigma
    out = []
    for j, flag in ((0, True), (1, False)):
        mse, se = [], []
        for x, k in zip(probe, nodes):
            i = pos[k]
            F = gaussian_smooth(params.payoff, ens.Z[:, i], float(S(1.0) - S(x)), rule.nodes)
            e2 = (F - ens.field("P", j)[:, i]) ** 2
            mse.append(float(np.mean(e2)))
            se.append(float(np.std(e2, ddof=1) / math.sqrt(n_paths)))
        out.append(EfficiencyCurve(flag, probe.tolist(), mse, se, n_paths))
    return out[0], out[1]


def efficiency_curve(params, rule, with_insider: bool, n_paths, probe_times, m=2 ** 12, base_seed=0,
                     workers=1) -> EfficiencyCurve:
    ins, base = efficiency_curves(params, rule, n_paths, probe_times, m, base_seed, workers)
    return ins if with_insider else base


# ---------------------------------------------------------------- optimality

@dataclass
class OptimalityRow:
    strategy: str
    mean: float
    stderr: float
    joint_stderr: float     # sqrt(se^2 + se_equilibrium^2)
    shortfall_se: float     # (bound - mean) / joint_stderr
    role: str               # equilibrium | suboptimal | other


@dataclass
class OptimalityTable:
    bound: float
    n_paths: int
    grid_size: int
    rows: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    def row(self, label):
        for r in self.rows:
            if r.strategy == label:
                return r
        raise KeyError(label)

    def to_dict(self):
        return _clean({"bound": self.bound, "n_paths": self.n_paths, "grid_size": self.grid_size,
                       "rows": [asdict(r) for r in self.rows], "violations": list(self.violations)})


SUBOPTIMAL = ("zero", "jump_at", "diffusive", "buy_and_hold")


def _fill_table(table: OptimalityTable, strategies, st):
    eq = [s.label for s in strategies if s.variant.startswith(("equilibrium", "target_chasing"))]
    se_eq = st[eq[0]].stderr if eq else 0.0
    bound = table.bound
    for s in strategies:
        p = st[s.label]
        role = "equilibrium" if s.label in eq else (
            "suboptimal" if s.variant in SUBOPTIMAL else "other")
        joint = p.stderr if role == "equilibrium" else math.hypot(p.stderr, se_eq)
        short = (bound - p.mean) / joint if joint > 0 else (math.inf if bound > p.mean else 0.0)
        table.rows.append(OptimalityRow(s.label, p.mean, p.stderr, joint, short, role))
        if role == "equilibrium" and abs(short) > 3:
            table.violations.append(f"{s.label} misses the bound by {short:.2f} standard errors")
        if role == "suboptimal" and short < 3:
            table.violations.append(f"{s.label} is within {short:.2f} standard errors of the bound")


def optimality_table(params: ModelParams, rule: PricingRule, strategies, n_paths: int,
                     grid: TimeGrid | None = None, base_seed: int = 0, m: int = 2 ** 14,
                     workers=1) -> OptimalityTable:
    """Mean profit per strategy against the bound E[V(0, v, 0)].

    Equilibrium strategies must come within 3 standard errors of the bound;
    the suboptimal variants must fall short of it by at least 3 joint
    standard errors. Failures are listed as violations.
    """
    strategies = list(strategies)
    bound = profit_upper_bound(ValueFunction(rule, params))
    grid = grid or equilibrium_grid(params, rule, m)
    table = OptimalityTable(bound, int(n_paths), grid.m)
    if not strategies:
        return table
    ens = simulate_ensemble(params, rule, strategies, grid, n_paths, base_seed, workers=workers)
    _fill_table(table, strategies, ensemble_stats(ens))
    return table


# ---------------------------------------------------------------- report

@dataclass
class MetricsReport:
    scenario: str
    inconspicuousness: dict = field(default_factory=dict)   # strategy -> report
    bridge: BridgeSummary | None = None
    efficiency: list = field(default_factory=list)
    optimality: OptimalityTable | None = None

    def to_dict(self):
        return _clean({
            "scenario": self.scenario,
            "inconspicuousness": {k: v.to_dict() for k, v in self.inconspicuousness.items()},
            "bridge": self.bridge.to_dict() if self.bridge else None,
            "efficiency": [c.to_dict() for c in self.efficiency],
            "optimality": self.optimality.to_dict() if self.optimality else None,
        })


def metrics_report(name: str, params: ModelParams, rule: PricingRule, n_paths: int, m: int,
                   base_seed: int, strategies=(), probe_times=(0.5, 0.9, 0.99), n_probe=16,
                   workers=1) -> MetricsReport:
    """Every analysis on one scenario from one shared ensemble plus an efficiency run."""
    insider = StrategySpec(_insider_variant(rule), weighting=rule.weighting)
    strategies = [insider] + [s for s in strategies if s.label != insider.label]
    probes = np.linspace(0.0, 1.0, n_probe + 1)
    grid = equilibrium_grid(params, rule, m, extra=probes[1:-1])
    nodes = [grid.index_of(float(x)) for x in probes]
    ens = simulate_ensemble(params, rule, strategies, grid, n_paths, base_seed, record=nodes,
                            workers=workers)
    rep = MetricsReport(name)
    for j, lab in enumerate(ens.labels):
        rep.inconspicuousness[lab] = inconspicuousness_test(ens.field("Y", j), grid.nodes[ens.rec_nodes])
    rep.bridge = bridge_error(ens.gaps[:, :, 0], ens.breakpoints)
    rep.efficiency = list(efficiency_curves(params, rule, n_paths, probe_times, m, base_seed + 1, workers))
    tab = OptimalityTable(profit_upper_bound(ValueFunction(rule, params)), n_paths, grid.m)
    _fill_table(tab, strategies, ensemble_stats(ens))
    rep.optimality = tab
    return rep
