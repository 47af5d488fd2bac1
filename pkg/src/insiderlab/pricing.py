"""Pricing rules H(y, t), their inverses and the fundamental value F(z, t)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError, RangeError
from .model import PayoffSpec, VolatilitySpec, WeightingFunction
from .quadrature import gauss_hermite

CLOSED_FORM = ("identity", "affine", "cubic")


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0) or np.any(t > 1):
        raise DomainError("time outside [0, 1]")
    return t


def gaussian_smooth(payoff: PayoffSpec, y, var, nodes=64, closed_form=True):
    """E[f(y + sqrt(var) N)] for N standard normal, broadcasting y and var."""
    y = np.asarray(y, dtype=float)
    var = np.asarray(var, dtype=float)
    y, var = np.broadcast_arrays(y, var)
    fam = payoff.family
    if closed_form and fam in CLOSED_FORM:
        if fam == "identity":
            out = y * 1.0
        elif fam == "affine":
            out = payoff.params["a"] * y + payoff.params["b"]
        else:
            out = y ** 3 + 3.0 * y * var
    else:
        x, w = gauss_hermite(nodes)
        sd = np.sqrt(np.maximum(var, 0.0))
        with np.errstate(over="ignore", invalid="ignore"):
            vals = payoff(y[..., None] + sd[..., None] * x)
            out = np.sum(vals * w, axis=-1)
        # no remaining noise: exact terminal value
        out = np.where(var <= 0, payoff(y), out)
    if np.any(~np.isfinite(out)):
        raise NumericError("payoff evaluation overflowed")
    return out if out.ndim else float(out)


def gaussian_smooth_dy(payoff: PayoffSpec, y, var, nodes=64):
    """d/dy of :func:`gaussian_smooth`."""
    y, var = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(var, dtype=float))
    fam = payoff.family
    if fam == "identity":
        out = np.ones_like(y)
    elif fam == "affine":
        out = np.full_like(y, payoff.params["a"])
    elif fam == "cubic":
        out = 3.0 * y * y + 3.0 * var
    else:
        x, w = gauss_hermite(nodes)
        sd = np.sqrt(np.maximum(var, 0.0))
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.sum(payoff.derivative(y[..., None] + sd[..., None] * x) * w, axis=-1)
        out = np.where(var <= 0, payoff.derivative(y), out)
    return out if out.ndim else float(out)


class PricingRule:
    """H(y, t) = E[f(y + sqrt(rho(t)) N)].

    ``weighting`` of None gives the Markov rule with rho(t) = 1 - t;
    otherwise rho(t) is the remaining integral of g^2.
    """

    def __init__(self, payoff: PayoffSpec, weighting: WeightingFunction | None = None,
                 nodes: int = 64):
        if nodes < 2:
            raise DomainError("need at least two quadrature nodes")
        self.payoff = payoff
        self.weighting = weighting
        self.nodes = int(nodes)

    @classmethod
    def markov(cls, payoff, nodes=64):
        return cls(payoff, None, nodes)

    @classmethod
    def weighted(cls, payoff, w, nodes=64):
        return cls(payoff, w, nodes)

    @property
    def is_markov(self):
        return self.weighting is None

    def rho(self, t):
        t = _check_t(t)
        if self.weighting is None:
            return 1.0 - t
        return self.weighting.rho(t)

    def w2(self, t):
        """Squared weight at t (1 for the Markov rule)."""
        if self.weighting is None:
            return np.ones_like(np.asarray(t, dtype=float))
        return self.weighting(t) ** 2

    @property
    def breakpoints(self):
        if self.weighting is None:
            return np.array([1.0])
        return self.weighting.breakpoints

    def __repr__(self):
        return f"PricingRule({self.payoff!r}, {self.weighting!r}, nodes={self.nodes})"


def price(rule: PricingRule, y, t):
    """H(y, t); closed forms for polynomial payoffs, Gauss-Hermite otherwise."""
    return gaussian_smooth(rule.payoff, y, rule.rho(t), rule.nodes)


def price_quadrature(rule: PricingRule, y, t):
    """H(y, t) always by Gauss-Hermite, for cross-checking the closed forms."""
    return gaussian_smooth(rule.payoff, y, rule.rho(t), rule.nodes, closed_form=False)


def price_dy(rule: PricingRule, y, t):
    return gaussian_smooth_dy(rule.payoff, y, rule.rho(t), rule.nodes)


def _range_of(rule, t):
    """Closure of the range of H(., t) as (lo, hi, lo_attained, hi_attained)."""
    f = rule.payoff
    if f.family == "exponential":
        return 0.0, np.inf, False, False
    if f.family == "table":
        terminal = float(rule.rho(t)) <= 0
        return f._f[0], f._f[-1], terminal, terminal
    return -np.inf, np.inf, False, False


def _closed_inverse(rule, p, t):
    """Explicit inverse where H(., t) has one, else None."""
    f = rule.payoff
    rho = float(rule.rho(t))
    if f.family == "identity":
        return p * 1.0
    if f.family == "affine":
        return (p - f.params["b"]) / f.params["a"]
    if f.family == "cubic":
        # depressed cubic y^3 + 3 rho y - p = 0 has one real root for rho >= 0
        d = np.sqrt(0.25 * p * p + rho ** 3)
        return np.cbrt(0.5 * p + d) + np.cbrt(0.5 * p - d)
    if f.family == "exponential":
        s, r = f.params["scale"], f.params["rate"]
        return (np.log(p / s) - 0.5 * r * r * rho) / r
    return None


def _newton(rule, y, pf, t, steps=3):
    H = lambda y: np.atleast_1d(price(rule, y, t))
    for _ in range(steps):
        d = np.atleast_1d(price_dy(rule, y, t))
        step = np.where(d > 0, (H(y) - pf) / np.where(d > 0, d, 1.0), 0.0)
        y_new = y - step
        better = np.abs(H(y_new) - pf) < np.abs(H(y) - pf)
        y = np.where(better, y_new, y)
    return y


def inverse_price(rule: PricingRule, p, t, tol=1e-10):
    """The y with H(y, t) = p: explicit where possible, else bracketing bisection,
    then Newton polish."""
    p_arr = np.asarray(p, dtype=float)
    t = float(_check_t(t))
    if np.any(~np.isfinite(p_arr)):
        raise DomainError("price must be finite")
    lo_v, hi_v, lo_in, hi_in = _range_of(rule, t)
    below = (p_arr < lo_v) | ((p_arr == lo_v) & (not lo_in))
    above = (p_arr > hi_v) | ((p_arr == hi_v) & (not hi_in))
    if np.any(below | above):
        raise RangeError(f"price outside the range of H(., {t})")
    pf = p_arr.ravel()
    y0 = _closed_inverse(rule, pf, t)
    if y0 is not None:
        with np.errstate(all="ignore"):
            y = _newton(rule, y0, pf, t) if rule.payoff.family in ("cubic", "exponential") else y0
            resid = np.abs(np.atleast_1d(price(rule, y, t)) - pf)
        if np.all(resid <= tol * np.maximum(1.0, np.abs(pf))):
            y = y.reshape(p_arr.shape)
            return float(y) if y.ndim == 0 else y
    lo = np.full(pf.shape, -8.0)
    hi = np.full(pf.shape, 8.0)
    H = lambda y: np.atleast_1d(price(rule, y, t))
    for _ in range(64):
        hl, hh = H(lo), H(hi)
        need_lo = hl > pf
        need_hi = hh < pf
        if not (need_lo.any() or need_hi.any()):
            break
        lo = np.where(need_lo, 2.0 * lo, lo)
        hi = np.where(need_hi, 2.0 * hi, hi)
    else:
        raise RangeError("could not bracket the price")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.all((mid == lo) | (mid == hi)):
            break
        up = H(mid) < pf
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
    y = 0.5 * (lo + hi)
    if rule.payoff.family == "table" and float(rule.rho(t)) <= 0:
        # flat extrapolation: report the table end that attains the price
        xs = rule.payoff._x
        y = np.where(pf <= rule.payoff._f[0], xs[0], np.where(pf >= rule.payoff._f[-1], xs[-1], y))
    else:
        y = np.clip(_newton(rule, y, pf, t), lo, hi)
    resid = np.abs(H(y) - pf)
    if np.any(resid > tol * max(1.0, float(np.max(np.abs(pf))))):
        raise NumericError(f"inverse price residual {float(np.max(resid)):.3e} above tolerance")
    y = y.reshape(p_arr.shape)
    return float(y) if y.ndim == 0 else y


@dataclass(frozen=True)
class FundamentalValue:
    payoff: PayoffSpec
    vol: VolatilitySpec
    nodes: int = 64

    def remaining(self, t):
        S = self.vol.Sigma
        return S(1.0) - S(_check_t(t))


def fundamental(fv: FundamentalValue, z, t):
    """F(z, t) = E[f(Z_1) | Z_t = z]."""
    return gaussian_smooth(fv.payoff, z, fv.remaining(t), fv.nodes)


@dataclass
class Residual:
    max: float
    mean: float
    field: np.ndarray


def pde_residual(rule: PricingRule, y_grid, t_grid, hy=2.0 ** -10, ht=2.0 ** -10) -> Residual:
    """Finite-difference residual of H_t + (w^2/2) H_yy on a grid.

    Central differences in y and t; at t = 0 the time derivative is one-sided
    of second order. Stencils may not reach t = 1 or straddle a breakpoint of
    the weighting.
    """
    y = np.asarray(y_grid, dtype=float)
    t = np.asarray(t_grid, dtype=float)
    _check_t(t)
    bps = rule.breakpoints
    for tk in t:
        top = tk + (2 * ht if tk == 0 else ht)
        bot = tk if tk == 0 else tk - ht
        if top >= 1.0:
            raise DomainError("finite-difference stencil reaches t = 1")
        if np.any((bps > bot) & (bps < top)) or np.any(bps == tk):
            raise DomainError(f"finite-difference stencil at t={tk} straddles a breakpoint")
    Y, T = np.meshgrid(y, t, indexing="ij")
    H = lambda yy, tt: price(rule, yy, tt)
    Hyy = (H(Y + hy, T) - 2.0 * H(Y, T) + H(Y - hy, T)) / (hy * hy)
    at0 = T == 0
    Tc = np.where(at0, ht, T)
    Ht_c = (H(Y, Tc + ht) - H(Y, Tc - ht)) / (2.0 * ht)
    Ht_f = (-3.0 * H(Y, 0.0 * T) + 4.0 * H(Y, 0.0 * T + ht) - H(Y, 0.0 * T + 2 * ht)) / (2.0 * ht)
    Ht = np.where(at0, Ht_f, Ht_c)
    res = Ht + 0.5 * rule.w2(T) * Hyy
    a = np.abs(res)
    return Residual(float(a.max()), float(a.mean()), res)


def tower_gap(rule: PricingRule, y, t, s, nodes=None):
    """|E[H(y + sqrt(rho(t) - rho(s)) N, s)] - H(y, t)| for t < s."""
    x, w = gauss_hermite(nodes or rule.nodes)
    sd = np.sqrt(rule.rho(t) - rule.rho(s))
    y = np.asarray(y, dtype=float)
    inner = price(rule, y[..., None] + sd * x, s)
    return np.abs(np.sum(inner * w, axis=-1) - price(rule, y, t))
