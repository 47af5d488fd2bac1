"""Market trajectories under equilibrium and deliberately suboptimal strategies."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _engine as E
from .errors import DomainError, NumericError, SingularityError
from .model import ModelParams, PayoffSpec, WeightingFunction, nonmarkov_denominator
from .pricing import PricingRule, fundamental, FundamentalValue, inverse_price, price
from .quadrature import gauss_hermite, gauss_legendre
from .rng import split_seed

MIN_STEP = 2.0 ** -26
MAX_RATIO = 0.98


# ---------------------------------------------------------------- grids

@dataclass(frozen=True)
class TimeGrid:
    nodes: np.ndarray
    mode: str = "uniform"
    singular_times: tuple = ()

    def __post_init__(self):
        s = np.asarray(self.nodes, dtype=float)
        if s.ndim != 1 or len(s) < 2 or s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
            raise DomainError("grid nodes must increase strictly from 0 to 1")
        s.setflags(write=False)
        object.__setattr__(self, "nodes", s)

    @property
    def m(self):
        return len(self.nodes) - 1

    @property
    def dt(self):
        return np.diff(self.nodes)

    def index_of(self, t):
        """Index of the node equal to t (exactly)."""
        i = int(np.searchsorted(self.nodes, t))
        if i > self.m or self.nodes[i] != t:
            raise DomainError(f"time {t} is not a grid node")
        return i

    def nearest(self, t):
        return int(np.argmin(np.abs(self.nodes - t)))

    @classmethod
    def uniform(cls, m, extra=()):
        s = np.linspace(0.0, 1.0, int(m) + 1)
        if len(extra):
            s = np.unique(np.concatenate([s, np.asarray(extra, dtype=float)]))
        return cls(s, "uniform", ())

    @classmethod
    def geometric(cls, m, singular_left=(), singular_right=(), ratio_left=None, ratio_right=None,
                  octaves=12, min_step=MIN_STEP, fixed=()):
        """Uniform base grid refined geometrically toward singular times.

        ``singular_left`` are approached from the left, ``singular_right``
        are left toward the right (restart points). Ratios may be given per
        time as dicts; the default is 0.5. The total step count equals ``m``
        whenever ``m`` exceeds the refinement overhead.
        """
        ratio_left = ratio_left or {}
        ratio_right = ratio_right or {}
        sl = sorted(float(t) for t in singular_left)
        sr = sorted(float(t) for t in singular_right)
        anchors = np.unique(np.concatenate([[0.0, 1.0], sl, sr, np.asarray(fixed, dtype=float)]))

        def refine(h):
            dmin = max(h * 2.0 ** -octaves, min_step)
            nodes = []
            # the geometric zone reaches out until its steps match h, so the
            # first uniform step is no larger than the local contraction scale
            for t in sl:
                q = ratio_left.get(t, 0.5)
                d = max(h * q, h / (1.0 - q))
                while d >= dmin * (1 - 1e-12):
                    nodes.append(t - d)
                    d *= q
            for t in sr:
                q = ratio_right.get(t, 0.5)
                d = dmin
                while d * (1.0 - q) / q < h * (1 - 1e-9):
                    nodes.append(t + d)
                    d /= q
                nodes.append(t + d)
            return nodes

        def build(base):
            widths = np.diff(anchors)
            counts = np.maximum(1, np.round(widths * base).astype(int))
            counts[np.argmax(widths)] += base - counts.sum()
            counts = np.maximum(counts, 1)
            pts = [anchors[-1:]]
            for a, b, n in zip(anchors[:-1], anchors[1:], counts):
                pts.append(np.linspace(a, b, n + 1)[:-1])
            h = float(np.min(widths / counts))
            s = np.unique(np.concatenate(pts + [np.asarray(refine(h))]))
            return s[(s >= 0) & (s <= 1)]

        m = int(m)
        base = max(m - len(refine(1.0 / max(m, 1))), len(anchors) - 1)
        s = build(base)
        # merged nodes shift the count slightly: drop below m, then split the
        # widest steps at their midpoints
        for _ in range(50):
            if len(s) - 1 <= m or base <= len(anchors) - 1:
                break
            base -= len(s) - 1 - m
            s = build(max(base, len(anchors) - 1))
        short = m - (len(s) - 1)
        if short > 0:
            widest = np.argsort(-np.diff(s), kind="stable")[:short]
            s = np.sort(np.concatenate([s, 0.5 * (s[widest] + s[widest + 1])]))
        mode = "geometric"
        return cls(s, mode, tuple(sorted(set(sl) | set(sr))))


def stiffness(params: ModelParams, rule: PricingRule):
    """Drift stiffness alpha^2 / |D'| on each side of every singular time."""
    if rule.is_markov:
        D = params.D
        w = WeightingFunction.markov()
    else:
        w = rule.weighting
        D = nonmarkov_denominator(params, w)
    left, right = {}, {}
    for i, t in enumerate(w.breakpoints):
        a = w.weights[i]
        kap = -D.derivative(t, side="left")
        left[float(t)] = a * a / kap if kap > 0 else math.inf
        if i + 1 < w.n:
            a2 = w.weights[i + 1]
            kap2 = D.derivative(t, side="right")
            right[float(t)] = a2 * a2 / kap2 if kap2 > 0 else math.inf
    return left, right


def equilibrium_grid(params: ModelParams, rule: PricingRule, m: int, octaves=12,
                     min_step=MIN_STEP, extra=()) -> TimeGrid:
    """Geometric grid whose ratio near each singular time follows the drift stiffness.

    On the approach side the ratio is max(0.5, 1 - 1/beta); after a restart it
    is max(0.5, beta/(1 + beta)); both are capped at 0.98. With this choice an
    explicit step never overshoots the contraction of the drift. ``extra``
    times (probe times, say) become grid nodes.
    """
    bl, br = stiffness(params, rule)
    rl = {t: min(MAX_RATIO, max(0.5, 1.0 - 1.0 / b)) for t, b in bl.items()}
    rr = {t: min(MAX_RATIO, max(0.5, b / (1.0 + b))) for t, b in br.items()}
    knots = [k[0] for k in params.vol.knots] + [float(t) for t in extra]
    return TimeGrid.geometric(m, list(bl), list(br), rl, rr, octaves, min_step, fixed=knots)


# ---------------------------------------------------------------- strategies

VARIANTS = ("equilibrium_markov", "equilibrium_nonmarkov", "target_chasing",
            "target_chasing_nonmarkov", "zero", "buy_and_hold", "jump_at", "diffusive")


@dataclass(frozen=True)
class StrategySpec:
    variant: str
    weighting: WeightingFunction | None = None
    time: float = 0.5
    size: float = 1.0
    kappa: float = 0.5
    q: float = 1.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DomainError(f"unknown strategy {self.variant!r}")
        if self.variant.endswith("nonmarkov") and self.weighting is None:
            raise DomainError(f"{self.variant} needs a weighting function")

    @property
    def label(self):
        v = self.variant
        if v == "jump_at":
            return f"jump_at({self.time:g},{self.size:g})"
        if v == "diffusive":
            return f"diffusive({self.kappa:g})"
        if v == "buy_and_hold":
            return f"buy_and_hold({self.q:g})"
        return v

    @classmethod
    def parse(cls, text, weighting=None):
        """Parse labels such as ``jump_at(0.5,1)`` or ``diffusive(0.5)``."""
        text = text.strip()
        name, _, rest = text.partition("(")
        args = [float(a) for a in rest.rstrip(")").split(",") if a.strip()] if rest else []
        if name == "jump_at":
            return cls(name, time=args[0] if args else 0.5, size=args[1] if len(args) > 1 else 1.0)
        if name == "diffusive":
            return cls(name, kappa=args[0] if args else 0.5)
        if name == "buy_and_hold":
            return cls(name, q=args[0] if args else 1.0)
        if name.endswith("nonmarkov"):
            return cls(name, weighting=weighting)
        return cls(name)


def _same_weighting(a: WeightingFunction, b: WeightingFunction):
    return (len(a.partition) == len(b.partition) and np.allclose(a.partition, b.partition, atol=1e-14)
            and np.allclose(a.weights, b.weights, rtol=1e-12))


def _check_compatible(rule: PricingRule, strat: StrategySpec):
    v = strat.variant
    if v in ("equilibrium_markov", "target_chasing") and not rule.is_markov:
        raise DomainError(f"{v} needs the Markov pricing rule")
    if v.endswith("nonmarkov"):
        if rule.is_markov or not _same_weighting(rule.weighting, strat.weighting):
            raise DomainError(f"{v} needs a pricing rule with the same weighting")


# ---------------------------------------------------------------- tables

def _encode_payoff(f: PayoffSpec):
    par = np.zeros(4)
    tx = np.zeros(2)
    tf = np.zeros(2)
    fam = f.family
    if fam == "identity":
        code = E.P_IDENTITY
    elif fam == "affine":
        code = E.P_AFFINE
        par[:2] = f.params["a"], f.params["b"]
    elif fam == "cubic":
        code = E.P_CUBIC
    elif fam == "exponential":
        code = E.P_EXP
        par[:2] = f.params["scale"], f.params["rate"]
    else:
        code = E.P_TABLE
        tx = np.asarray(f.params["x"], dtype=float)
        tf = np.asarray(f.params["f"], dtype=float)
    return code, par, tx, tf


@dataclass
class _Tables:
    grid: TimeGrid
    dt: np.ndarray
    sdt: np.ndarray
    sdz: np.ndarray
    alpha: np.ndarray
    den: np.ndarray
    reset: np.ndarray
    tc_T: np.ndarray
    rho: np.ndarray
    brk_node: np.ndarray
    brk_times: np.ndarray
    payoff_rule: tuple
    payoff_model: tuple
    chase_mode: int
    chase_sd: np.ndarray
    chase_int: np.ndarray
    chase_z: np.ndarray
    chase_tab: np.ndarray


def _rule_weighting(rule):
    return WeightingFunction.markov() if rule.is_markov else rule.weighting


def _prepare(params: ModelParams, rule: PricingRule, grid: TimeGrid, need_chase=False) -> _Tables:
    s = grid.nodes
    m = grid.m
    dt = np.diff(s)
    Sig = params.vol.Sigma
    dS = np.maximum(np.diff(Sig(s)), 0.0)
    w = _rule_weighting(rule)
    idx = w.interval_index(s[1:])
    alpha = w.weights[idx].astype(float)
    if rule.is_markov:
        den = params.D(s[:-1])
    else:
        den = nonmarkov_denominator(params, w)(s[:-1])
    brk = w.breakpoints
    try:
        brk_node = np.array([grid.index_of(t) for t in brk], dtype=np.int64)
    except DomainError as exc:
        raise DomainError("grid must contain every breakpoint of the weighting") from exc
    reset = np.zeros(m, dtype=np.bool_)
    for t in brk[:-1]:
        reset[grid.index_of(t)] = True
    tc_T = w.partition[idx + 1] - s[:-1]
    rho = np.asarray(rule.rho(s), dtype=float)
    chase_mode = 0
    chase_sd = np.zeros(m)
    chase_z = np.zeros(2)
    chase_tab = np.zeros((1, 2))
    if need_chase:
        same = rule.payoff == params.payoff and all(
            abs(float(rule.rho(t)) - (Sig(1.0) - Sig(t))) <= 1e-12 for t in brk)
        if not same:
            chase_mode = 1
            chase_sd = np.sqrt(np.maximum(Sig(w.partition[idx + 1]) - Sig(s[:-1]), 0.0))
            chase_z = np.linspace(-12.0, 12.0, 2401)
            fv = FundamentalValue(params.payoff, params.vol)
            rows = []
            for t in brk:
                try:
                    rows.append(inverse_price(rule, fundamental(fv, chase_z, t), t))
                except Exception as exc:
                    raise DomainError("target chasing needs the fundamental inside the price range") from exc
            chase_tab = np.asarray(rows, dtype=float)
    return _Tables(grid, dt, np.sqrt(dt), np.sqrt(dS), alpha, np.asarray(den, dtype=float), reset,
                   tc_T, rho, brk_node, np.asarray(brk, dtype=float),
                   _encode_payoff(rule.payoff), _encode_payoff(params.payoff),
                   chase_mode, chase_sd, idx.astype(np.int64), chase_z, chase_tab)


def _encode_strategies(strategies, grid, rule):
    n = len(strategies)
    kind = np.zeros(n, dtype=np.int64)
    q0 = np.zeros(n)
    jstep = np.full(n, -1, dtype=np.int64)
    jsize = np.zeros(n)
    kappa = np.zeros(n)
    for j, st in enumerate(strategies):
        _check_compatible(rule, st)
        v = st.variant
        if v.startswith("equilibrium"):
            kind[j] = E.EQUILIBRIUM
        elif v.startswith("target_chasing"):
            kind[j] = E.TARGET
        elif v == "zero":
            kind[j] = E.ZERO
        elif v == "buy_and_hold":
            kind[j] = E.HOLD
            q0[j] = st.q
        elif v == "jump_at":
            kind[j] = E.EQUILIBRIUM
            node = max(grid.nearest(st.time), 1)
            jstep[j] = node - 1
            jsize[j] = st.size
        elif v == "diffusive":
            kind[j] = E.EQUILIBRIUM
            kappa[j] = st.kappa
    return kind, q0, jstep, jsize, kappa


# ---------------------------------------------------------------- results

@dataclass
class PathBundle:
    """One simulated trajectory; arrays are indexed by grid node."""

    grid: TimeGrid
    strategy: str
    v: float
    B1: np.ndarray
    B2: np.ndarray
    Z: np.ndarray
    theta: np.ndarray
    Y: np.ndarray
    xi: np.ndarray
    P: np.ndarray
    X1: float
    qv: float
    breakpoint_gaps: np.ndarray
    lambda_underflow: bool = False

    @property
    def dB1(self):
        return np.diff(self.B1)

    @property
    def dB2(self):
        return np.diff(self.B2)


@dataclass
class Ensemble:
    """Raw per-path outputs of an ensemble run."""

    grid: TimeGrid
    labels: list
    wealth: np.ndarray          # (paths, strategies)
    qv: np.ndarray              # (paths, strategies)
    gaps: np.ndarray            # (paths, breakpoints, strategies)
    rec_nodes: np.ndarray
    rec: np.ndarray             # (paths, rec nodes, 4, strategies): theta, Y, xi, P
    recz: np.ndarray            # (paths, rec nodes, 3): Z, B2, B1
    v: np.ndarray
    breakpoints: np.ndarray

    def field(self, name, j=0):
        k = {"theta": 0, "Y": 1, "xi": 2, "P": 3}[name]
        return self.rec[:, :, k, j]

    @property
    def Z(self):
        return self.recz[:, :, 0]

    @property
    def B2(self):
        return self.recz[:, :, 1]


def _run_batches(fn, n_paths, batch, workers):
    starts = list(range(0, n_paths, batch))
    spans = [(s, min(batch, n_paths - s)) for s in starts]
    if workers <= 1 or len(spans) == 1:
        for sp in spans:
            fn(*sp)
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(lambda sp: fn(*sp), spans))


def simulate_ensemble(params: ModelParams, rule: PricingRule, strategies, grid: TimeGrid,
                      n_paths: int, base_seed: int, record=(), first_path=0,
                      workers=1, batch=2048) -> Ensemble:
    """Euler ensemble of several strategies sharing all random draws.

    ``record`` lists node indices whose states are kept (``"all"`` keeps every
    node). Results depend only on (seed, path index), never on ``workers`` or
    ``batch``.
    """
    strategies = list(strategies)
    if not strategies:
        raise DomainError("need at least one strategy")
    need_chase = any(s.variant.startswith("target_chasing") for s in strategies)
    tb = _prepare(params, rule, grid, need_chase)
    kind, q0, jstep, jsize, kappa = _encode_strategies(strategies, grid, rule)
    need_w = bool(np.any(kappa != 0))
    rec_nodes = np.arange(grid.m + 1) if (isinstance(record, str) and record == "all") \
        else np.unique(np.asarray(record, dtype=np.int64))
    rec_nodes = rec_nodes.astype(np.int64)
    ns, nbk, nr = len(strategies), len(tb.brk_node), len(rec_nodes)
    wealth = np.zeros((n_paths, ns))
    qv = np.zeros((n_paths, ns))
    gaps = np.zeros((n_paths, nbk, ns))
    rec = np.zeros((n_paths, nr, 4, ns))
    recz = np.zeros((n_paths, nr, 3))
    vv = np.zeros(n_paths)
    status = np.zeros(n_paths, dtype=np.int64)
    node = np.zeros(n_paths, dtype=np.int64)
    klo, khi = split_seed(base_seed)
    gx, gw = gauss_hermite(64)
    gx, gw = np.array(gx), np.array(gw)
    pc, pp, ptx, ptf = tb.payoff_rule
    fc, fp, ftx, ftf = tb.payoff_model

    def run(start, count):
        sl = slice(start, start + count)
        E.euler_kernel(first_path + start, count, klo, khi, params.sigma,
                       tb.dt, tb.sdt, tb.sdz, tb.alpha, tb.den, tb.reset, tb.tc_T, tb.rho,
                       tb.brk_node, rec_nodes, kind, q0, jstep, jsize, kappa,
                       pc, pp, ptx, ptf, fc, fp, ftx, ftf, gx, gw,
                       tb.chase_mode, tb.chase_sd, tb.chase_int, tb.chase_z, tb.chase_tab, need_w,
                       wealth[sl], qv[sl], gaps[sl], rec[sl], recz[sl], vv[sl], status[sl], node[sl])

    _run_batches(run, n_paths, batch, workers)
    bad = np.nonzero(status)[0]
    if len(bad):
        i = int(bad[0])
        k = int(node[i])
        if status[i] == E.SINGULAR:
            raise SingularityError(f"denominator nonpositive at node {k} (t={grid.nodes[k]:.12g}) "
                                   f"on path {first_path + i}", time=float(grid.nodes[k]))
        raise NumericError(f"non-finite state on path {first_path + i} at node {k}", index=first_path + i)
    return Ensemble(grid, [s.label for s in strategies], wealth, qv, gaps, rec_nodes, rec, recz, vv,
                    tb.brk_times)


def simulate_path(params: ModelParams, rule: PricingRule, strategy: StrategySpec, grid: TimeGrid,
                  seed: int, path_index: int = 0) -> PathBundle:
    """A single Euler trajectory with every node recorded."""
    ens = simulate_ensemble(params, rule, [strategy], grid, 1, seed, record="all", first_path=path_index)
    return PathBundle(grid, strategy.label, float(ens.v[0]), ens.recz[0, :, 2], ens.recz[0, :, 1],
                      ens.recz[0, :, 0], ens.rec[0, :, 0, 0], ens.rec[0, :, 1, 0], ens.rec[0, :, 2, 0],
                      ens.rec[0, :, 3, 0], float(ens.wealth[0, 0]), float(ens.qv[0, 0]), ens.gaps[0, :, 0])


def wealth(bundle: PathBundle, payoff: PayoffSpec) -> float:
    """Left-point accumulation of theta against price increments plus the terminal term."""
    th, P = bundle.theta, bundle.P
    X = float(np.sum(th[:-1] * np.diff(P)) + (float(payoff(bundle.Z[-1])) - P[-1]) * th[-1])
    bundle.X1 = X
    return X


# ---------------------------------------------------------------- exact bridge

def _bridge_moments(params: ModelParams, grid: TimeGrid, n=24):
    """Scaled step moments of the weighted noise integrals.

    With phi(s) = lambda(b)/lambda(s) on a step [a, b], returns phi(a),
    int phi, int phi^2, int sz2 phi, int sz2 phi^2 for every step.
    """
    s = grid.nodes
    m = grid.m
    c = params.vol.constant_value()
    out = np.zeros((m, 5))
    a, b = s[:-1], s[1:]
    if c is not None and c < 1.0:
        p = 1.0 / (1.0 - c)
        with np.errstate(divide="ignore", invalid="ignore"):
            lx = np.log1p(-b) - np.log1p(-a)   # log((1-b)/(1-a))

            def I(k):
                e = k * p - 1.0
                if abs(e) < 1e-14:
                    return (1.0 - b) * (-lx)
                return (1.0 - b) * (-np.expm1(e * lx)) / e
            out[:, 0] = np.exp(p * lx)
            out[:, 1] = I(1)
            out[:, 2] = I(2)
        out[-1, :3] = 0.0
        out[:, 3] = c * out[:, 1]
        out[:, 4] = c * out[:, 2]
        return out
    D = params.D
    x, wq = gauss_legendre(n)
    for k in range(m - 1):
        lo, hi = a[k], b[k]
        h = hi - lo
        t = lo + h * x
        # int_t^hi 1/D by an inner rule on each outer node, plus the step start
        pts = np.concatenate([t, [lo]])
        inner = pts[:, None] + (hi - pts)[:, None] * x[None, :]
        L = (hi - pts) * np.sum(wq / D(inner), axis=1)
        phi = np.exp(-L[:-1])
        sz = params.vol.sigma_z2(t)
        out[k, 0] = math.exp(-L[-1])
        out[k, 1] = h * np.sum(wq * phi)
        out[k, 2] = h * np.sum(wq * phi * phi)
        out[k, 3] = h * np.sum(wq * sz * phi)
        out[k, 4] = h * np.sum(wq * sz * phi * phi)
    return out


def _bridge_tables(params: ModelParams, grid: TimeGrid):
    mom = _bridge_moments(params, grid)
    dt = grid.dt
    sdt = np.sqrt(dt)
    dS = np.maximum(np.diff(params.vol.Sigma(grid.nodes)), 0.0)
    sdz = np.sqrt(dS)
    c21 = mom[:, 1] / sdt
    c22 = np.sqrt(np.maximum(mom[:, 2] - c21 ** 2, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        e21 = np.where(sdz > 0, mom[:, 3] / np.where(sdz > 0, sdz, 1.0), 0.0)
    e22 = np.sqrt(np.maximum(mom[:, 4] - e21 ** 2, 0.0))
    return sdt, sdz, mom[:, 0], c21, c22, e21, e22


def _check_bridge_scenario(params: ModelParams, grid: TimeGrid):
    D = params.D
    bad = [r for r in D.roots(0.0, 1.0) if r < 1.0 - 1e-12]
    if D(0.0) <= 0 or bad:
        t = 0.0 if D(0.0) <= 0 else bad[0]
        raise SingularityError(f"Markov denominator vanishes at t={t:.12g}", time=t)
    # lambda at the last interior node; zero means the limit took over early
    from .model import _log_lambda_and_xi
    L, _ = _log_lambda_and_xi(params, float(grid.nodes[-2]), want_xi=False)
    return bool(math.exp(-L) == 0.0)


def exact_bridge_ensemble(params: ModelParams, grid: TimeGrid, n_paths: int, base_seed: int,
                          record=(), first_path=0, workers=1, batch=4096, rule=None) -> Ensemble:
    """Y from its closed-form representation with exact per-step Gaussian increments."""
    underflow = _check_bridge_scenario(params, grid)
    rule = rule or PricingRule.markov(params.payoff)
    sdt, sdz, ratio, c21, c22, e21, e22 = _bridge_tables(params, grid)
    rho = np.asarray(rule.rho(grid.nodes), dtype=float)
    rec_nodes = np.arange(grid.m + 1) if (isinstance(record, str) and record == "all") \
        else np.unique(np.asarray(record, dtype=np.int64))
    rec_nodes = rec_nodes.astype(np.int64)
    nr = len(rec_nodes)
    wealth_ = np.zeros(n_paths)
    qv = np.zeros(n_paths)
    rec = np.zeros((n_paths, nr, 4))
    recz = np.zeros((n_paths, nr, 3))
    vv = np.zeros(n_paths)
    gap = np.zeros(n_paths)
    klo, khi = split_seed(base_seed)
    gx, gw = (np.array(a) for a in gauss_hermite(64))
    pc, pp, ptx, ptf = _encode_payoff(rule.payoff)
    fc, fp, ftx, ftf = _encode_payoff(params.payoff)

    def run(start, count):
        sl = slice(start, start + count)
        E.bridge_kernel(first_path + start, count, klo, khi, params.sigma, sdt, sdz, ratio,
                        c21, c22, e21, e22, rho, rec_nodes, pc, pp, ptx, ptf, fc, fp, ftx, ftf,
                        gx, gw, wealth_[sl], qv[sl], rec[sl], recz[sl], vv[sl], gap[sl])

    _run_batches(run, n_paths, batch, workers)
    ens = Ensemble(grid, ["exact_bridge"], wealth_[:, None], qv[:, None], gap[:, None, None],
                   rec_nodes, rec[..., None], recz, vv, np.array([1.0]))
    ens.lambda_underflow = underflow
    return ens


def exact_bridge_path(params: ModelParams, grid: TimeGrid, seed: int, path_index: int = 0) -> PathBundle:
    ens = exact_bridge_ensemble(params, grid, 1, seed, record="all", first_path=path_index)
    return PathBundle(grid, "exact_bridge", float(ens.v[0]), ens.recz[0, :, 2], ens.recz[0, :, 1],
                      ens.recz[0, :, 0], ens.rec[0, :, 0, 0], ens.rec[0, :, 1, 0], ens.rec[0, :, 2, 0],
                      ens.rec[0, :, 3, 0], float(ens.wealth[0, 0]), float(ens.qv[0, 0]),
                      ens.gaps[0, :, 0], ens.lambda_underflow)


# ---------------------------------------------------------------- Monte Carlo

@dataclass
class ProfitStats:
    strategy: str
    n_paths: int
    mean: float
    stderr: float
    qv_mean: float
    bridge_times: list = field(default_factory=list)
    bridge_mean_abs: list = field(default_factory=list)
    bridge_q50: list = field(default_factory=list)
    bridge_q95: list = field(default_factory=list)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _stats(label, w, qv, gaps, times):
    n = len(w)
    mean = float(np.mean(w))
    se = float(np.std(w, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    ag = np.abs(gaps)
    return ProfitStats(label, n, mean, se, float(np.mean(qv)), [float(t) for t in times],
                       [float(x) for x in ag.mean(axis=0)],
                       [float(x) for x in np.quantile(ag, 0.5, axis=0)],
                       [float(x) for x in np.quantile(ag, 0.95, axis=0)])


def ensemble_stats(ens: Ensemble):
    return {lab: _stats(lab, ens.wealth[:, j], ens.qv[:, j], ens.gaps[:, :, j], ens.breakpoints)
            for j, lab in enumerate(ens.labels)}


def monte_carlo_many(params, rule, strategies, grid, n_paths, base_seed, workers=1, batch=2048):
    if n_paths < 2:
        raise DomainError("need at least two paths")
    ens = simulate_ensemble(params, rule, strategies, grid, n_paths, base_seed, workers=workers, batch=batch)
    return ensemble_stats(ens), ens


def monte_carlo(params, rule, strategy, grid, n_paths, base_seed, workers=1, batch=2048) -> ProfitStats:
    stats, _ = monte_carlo_many(params, rule, [strategy], grid, n_paths, base_seed, workers, batch)
    return stats[strategy.label]
