"""The market maker's Kalman-Bucy filter and its posterior variance ODE.

On an interval with weight a the posterior variance solves
gamma' = sigma_z^2 - a^2 gamma^2 / D^2, whose solution is the denominator D
itself. The filter restarts with gamma = 0 at every breakpoint of a weighting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dynamics import TimeGrid
from .errors import DomainError, SingularityError
from .model import ModelParams, WeightingFunction, nonmarkov_denominator

EPS = 2.0 ** -10


@dataclass
class GammaPath:
    t: np.ndarray
    gamma: np.ndarray
    analytic: np.ndarray

    @property
    def max_error(self):
        ok = np.isfinite(self.gamma)
        return float(np.max(np.abs(self.gamma[ok] - self.analytic[ok])))


@dataclass
class FilterState:
    m: float
    gamma: float

    def __post_init__(self):
        if not self.gamma >= 0:
            raise DomainError("posterior variance must be nonnegative")


@dataclass
class FilterResult:
    t: np.ndarray
    m: np.ndarray
    gamma: np.ndarray
    gamma_analytic: np.ndarray
    innovations: np.ndarray     # one per step; nan where the filter is paused
    dt: np.ndarray
    observed: np.ndarray        # the process the filter tracks: Y, or xi for a weighting
    max_drift: float
    stiffness: np.ndarray       # a^2 gamma ds / D^2 per step; inf at a restart

    def state(self, k):
        return FilterState(float(self.m[k]), float(self.gamma[k]))


def _setup(params: ModelParams, grid: TimeGrid, weighting, eps):
    w = weighting or WeightingFunction.markov()
    D = params.D if weighting is None else nonmarkov_denominator(params, w)
    s = grid.nodes
    last = int(np.searchsorted(s, 1.0 - eps, side="right")) - 1
    if last < 1:
        raise DomainError("grid has no node below 1 - eps")
    return w, D, s, last


def _active(s, k, w, eps):
    """Whether step k (s_k to s_{k+1}) lies inside an interval, clear of its end."""
    i = int(w.interval_index(s[k + 1]))
    return s[k + 1] <= w.partition[i + 1] - eps and s[k] >= w.partition[i]


def _rk4_step(g, a, b, sig, a2, D):
    """RK4 over [a, b] with substeps sized by the local stiffness 2 a2 / D."""
    def rhs(t, y, side):
        d = D(t, side=side)
        return sig(t, side) - a2 * (y / d) ** 2

    def sub(g, lo, hi):
        dmin = min(D(lo, side="right"), D(hi, side="left"))
        if dmin <= 0:
            raise SingularityError(f"denominator vanishes in [{lo}, {hi}]", time=float(lo))
        n = max(1, int(math.ceil((hi - lo) * 2.0 * a2 / dmin)))
        h = (hi - lo) / n
        for j in range(n):
            t = lo + j * h
            side_end = "left" if j == n - 1 else "right"
            te = hi if j == n - 1 else t + h
            k1 = rhs(t, g, "right")
            k2 = rhs(t + 0.5 * h, g + 0.5 * h * k1, "right")
            k3 = rhs(t + 0.5 * h, g + 0.5 * h * k2, "right")
            k4 = rhs(te, g + h * k3, side_end)
            g = g + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        return g

    if D(a, side="right") > 0:
        return sub(g, a, b)
    # restart: gamma and D vanish together, gamma / D -> 1, so the slope is
    # sigma_z^2 - a2; leave the singular point along it, then refine geometrically
    pts = np.unique(a + (b - a) * 2.0 ** -np.arange(40, -1, -1))
    pts = np.array([x for x in pts if x > a and D(x, side="left") > 0])
    g =(sig(a, "right") - a2) * (pts[0] - a)
    for lo, hi in zip(pts[:-1], pts[1:]):
        g = sub(g, lo, hi)
    return g


def gamma_ode_solve(params: ModelParams, grid: TimeGrid, weighting: WeightingFunction | None = None,
                    eps: float = EPS) -> GammaPath:
    """Classical RK4 for the posterior variance, next to its closed form.

    Integration stops at the last node below 1 - eps. With a weighting the
    variance restarts at 0 at each breakpoint, and nodes within eps to the left
    of a breakpoint are left as nan.
    """
    w, D, s, last = _setup(params, grid, weighting, eps)
    sig = params.vol.sigma_z2
    t = s[: last + 1]
    gam = np.full(last + 1, np.nan)
    gam[0] = params.sigma2
    analytic = np.array([D(x, side="right") for x in t])
    for k in range(last):
        if not _active(s, k, w, eps):
            if s[k + 1] in w.partition:
                gam[k + 1] = 0.0
            continue
        a2 = float(w(s[k + 1])) ** 2
        gam[k + 1] = _rk4_step(gam[k], s[k], s[k + 1], sig, a2, D)
    if weighting is None and np.any(analytic[1:] <= 0):
        k = int(np.argmax(analytic[1:] <= 0)) + 1
        raise SingularityError(f"denominator vanishes at t={t[k]:.12g}", time=float(t[k]))
    return GammaPath(t, gam, analytic)


def kalman_filter(params: ModelParams, Y, grid: TimeGrid, weighting: WeightingFunction | None = None,
                  eps: float = EPS, gamma: GammaPath | None = None) -> FilterResult:
    """Discrete conditionally Gaussian filter of Z given the total order path.

    On an interval with weight a and anchors (Z_a, Y_a) the tracked process is
    U = xi_a + a (Y - Y_a); the innovation is dY - a (m - U) / D ds and the
    mean moves by (a gamma / D) times the innovation. ``Y`` may be one path or
    an array of paths (paths, nodes).
    """
    Y = np.asarray(Y, dtype=float)
    single = Y.ndim == 1
    Y2 = np.atleast_2d(Y)
    if Y2.shape[1] != grid.m + 1:
        raise DomainError("Y must have one value per grid node")
    gp = gamma or gamma_ode_solve(params, grid, weighting, eps)
    w, D, s, last = _setup(params, grid, weighting, eps)
    n = Y2.shape[0]
    ds = np.diff(s[: last + 1])
    m = np.full((n, last + 1), np.nan)
    innov = np.full((n, last), np.nan)
    stiff = np.full(last, np.inf)
    obs = np.zeros((n, last + 1))
    m[:, 0] = 0.0
    xi_a = np.zeros(n)
    Ya = Y2[:, 0].copy()
    xi = np.zeros(n)
    drift = 0.0
    for k in range(last):
        i = int(w.interval_index(s[k + 1]))
        a = float(w.weights[i])
        if s[k] == w.partition[i] and k > 0:
            # restart: the breakpoint reveals the firm value through xi
            xi_a = xi.copy()
            Ya = Y2[:, k].copy()
            m[:, k] = xi_a
        dY = Y2[:, k + 1] - Y2[:, k]
        U = xi_a + a * (Y2[:, k] - Ya)
        xi = xi + a * dY
        obs[:, k + 1] = xi
        if not _active(s, k, w, eps):
            continue
        d = D(s[k], side="right")
        if d > 0:
            dr = a * (m[:, k] - U) / d * ds[k]
            ratio = gp.gamma[k] / d
            stiff[k] = a * a * gp.gamma[k] * ds[k] / (d * d)
        else:
            dr = np.zeros(n)
            ratio = 1.0
        e = dY - dr
        innov[:, k] = e
        m[:, k + 1] = m[:, k] + a * ratio * e
        drift = max(drift, float(np.max(np.abs(dr))) if n else 0.0)
    if single:
        m, innov, obs = m[0], innov[0], obs[0]
    return FilterResult(gp.t, m, gp.gamma, gp.analytic, innov, ds, obs, drift, stiff)


@dataclass
class WhitenessReport:
    n: np.ndarray
    mean_z: np.ndarray
    variance: np.ndarray
    chi2_p: np.ndarray
    lag1: np.ndarray
    lag1_bound: np.ndarray
    mean_ok: np.ndarray
    variance_ok: np.ndarray
    lag1_ok: np.ndarray

    @property
    def passed(self):
        return self.mean_ok & self.variance_ok & self.lag1_ok

    @property
    def pass_rate(self):
        return float(np.mean(self.passed))


def innovations_whiteness(innovations, ds, level: float = 0.99, stiffness=None,
                          max_stiffness: float = 0.05) -> WhitenessReport:
    """Per-path tests that standardized innovations are white standard normal.

    Each innovation is scaled by its discrete predicted variance
    ds (1 + stiffness). Steps whose stiffness exceeds ``max_stiffness`` do not
    resolve the filter time scale D / a^2, where the discretized continuous
    filter is not white, and are skipped together with nan steps. Zero mean by
    a z-test, unit variance by a two-sided chi-square band and lag-1
    autocorrelation within 3 / sqrt(n).
    """
    e = np.atleast_2d(np.asarray(innovations, dtype=float))
    ds = np.broadcast_to(np.asarray(ds, dtype=float), e.shape)
    st = np.zeros(e.shape) if stiffness is None else np.broadcast_to(np.asarray(stiffness, dtype=float), e.shape)
    alpha = 1.0 - level
    out = {k: [] for k in ("n", "mean_z", "variance", "chi2_p", "lag1", "lag1_bound")}
    for row, h, c in zip(e, ds, st):
        ok = np.isfinite(row) & (c <= max_stiffness)
        z = row[ok] / np.sqrt(h[ok] * (1.0 + c[ok]))
        n = len(z)
        if n < 3:
            raise DomainError("need at least three innovations")
        ss = float(np.sum(z * z))
        cdf = stats.chi2.cdf(ss, n)
        zc = z - z.mean()
        r1 = float(np.sum(zc[1:] * zc[:-1]) / np.sum(zc * zc))
        out["n"].append(n)
        out["mean_z"].append(float(z.mean() * math.sqrt(n)))
        out["variance"].append(ss / n)
        out["chi2_p"].append(float(2.0 * min(cdf, 1.0 - cdf)))
        out["lag1"].append(r1)
        out["lag1_bound"].append(3.0 / math.sqrt(n))
    r = {k: np.asarray(v) for k, v in out.items()}
    q = stats.norm.ppf(1.0 - alpha / 2.0)
    return WhitenessReport(r["n"], r["mean_z"], r["variance"], r["chi2_p"], r["lag1"], r["lag1_bound"],
                           np.abs(r["mean_z"]) <= q, r["chi2_p"] >= alpha,
                           np.abs(r["lag1"]) <= r["lag1_bound"])
