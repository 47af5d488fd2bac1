"""The insider's value function, its terminal shape J and the profit bound.

V(y, z, t) = E[J(y + sqrt(rho(t)) N1, z + sqrt(S(1) - S(t)) N2)] is evaluated by
tensor Gauss-Hermite quadrature. J is exact through antiderivatives of the
(smoothed) pricing function, so no inner quadrature is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError
from .model import ModelParams, WeightingFunction
from .pricing import PricingRule, gaussian_smooth, inverse_price, price
from .quadrature import gauss_hermite


@dataclass(frozen=True)
class ValueFunction:
    rule: PricingRule
    params: ModelParams
    quadrature_nodes: int = 64

    def __post_init__(self):
        if self.quadrature_nodes < 2:
            raise DomainError("need at least two quadrature nodes")


def _smooth(func, x, var, nodes=64):
    """E[func(x + sqrt(var) N)] with exact evaluation when var = 0."""
    x = np.asarray(x, dtype=float)
    if var <= 0:
        return func(x)
    gx, gw = gauss_hermite(nodes)
    with np.errstate(over="ignore", invalid="ignore"):
        return np.sum(func(x[..., None] + np.sqrt(var) * gx) * gw, axis=-1)


def _remaining_vol(params: ModelParams, t):
    S = params.vol.Sigma
    return float(S(1.0) - S(t))


def fundamental_value(params: ModelParams, z, t, nodes=64):
    """F(z, t) = E[f(Z_1) | Z_t = z]."""
    return gaussian_smooth(params.payoff, z, _remaining_vol(params, t), nodes)


def ystar(rule: PricingRule, z, params: ModelParams | None = None, t=1.0):
    """Order level with H(y*, t) = F(z, t); at t = 1 this solves H(y*, 1) = f(z).

    Without ``params`` the payoff of the rule stands in for f.
    """
    f_payoff = params.payoff if params is not None else rule.payoff
    target = gaussian_smooth(f_payoff, z, _remaining_vol(params, t) if params is not None else 0.0,
                             rule.nodes)
    return inverse_price(rule, target, t)


def _J_at(rule: PricingRule, params: ModelParams, y, z, t):
    """int_y^{y*} (F(z, t) - H(x, t)) dx through an antiderivative of H(., t)."""
    y, z = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(z, dtype=float))
    rho = float(rule.rho(t))
    Fz = np.asarray(gaussian_smooth(params.payoff, z, _remaining_vol(params, t), rule.nodes))
    ys = np.asarray(inverse_price(rule, Fz, t))
    A = lambda x: _smooth(rule.payoff.antiderivative, x, rho, rule.nodes)
    with np.errstate(over="ignore", invalid="ignore"):
        J = Fz * (ys - y) - (A(ys) - A(y))
    if np.any(~np.isfinite(J)):
        raise NumericError("J evaluation overflowed")
    # nonnegative up to cancellation in the antiderivative difference
    J = np.maximum(J, 0.0)
    return J if J.ndim else float(J)


def J_value(rule: PricingRule, params: ModelParams, y, z):
    """J(y, z) = int_y^{y*(z)} (f(z) - H(x, 1)) dx."""
    return _J_at(rule, params, y, z, 1.0)


def _expect_J(rule, params, y, z, t, horizon, nodes):
    """E[J at horizon] from (y, z, t), perturbing y and z independently."""
    var_y = float(rule.rho(t) - rule.rho(horizon))
    S = params.vol.Sigma
    var_z = float(S(horizon) - S(t))
    y, z = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(z, dtype=float))
    gx, gw = gauss_hermite(nodes)
    if var_y <= 0 and var_z <= 0:
        return _J_at(rule, params, y, z, horizon)
    dy = np.sqrt(max(var_y, 0.0)) * gx
    dz = np.sqrt(max(var_z, 0.0)) * gx
    Y = y[..., None, None] + dy[:, None]
    Z = z[..., None, None] + dz[None, :]
    J = _J_at(rule, params, Y, Z, horizon)
    out = np.einsum("...ij,i,j->...", J, gw, gw)
    return out if out.ndim else float(out)


def value_V(vf: ValueFunction, y, z, t):
    """V(y, z, t) by tensor Gauss-Hermite quadrature."""
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise DomainError("time outside [0, 1]")
    return _expect_J(vf.rule, vf.params, y, z, t, 1.0, vf.quadrature_nodes)


def value_V_nonmarkov(rule: PricingRule, params: ModelParams, w: WeightingFunction, xi, z, t,
                      nodes: int = 64):
    """Composite value sum_i (1/a_i - 1/a_{i+1}) V^i + (1/a_n) V^n over t <= t_i.

    V^i is the expectation of J^i, the gap integral at horizon t_i, and t is
    placed in the half-open interval (t_{i-1}, t_i].
    """
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise DomainError("time outside [0, 1]")
    a = w.weights
    n = w.n
    wr = PricingRule.weighted(rule.payoff, w, rule.nodes)
    total = 0.0
    for i, ti in enumerate(w.breakpoints):
        if t > ti:
            continue
        coef = 1.0 / a[i] - 1.0 / a[i + 1] if i < n - 1 else 1.0 / a[i]
        total = total + coef * np.asarray(_expect_J(wr, params, xi, z, t, float(ti), nodes))
    total = np.asarray(total)
    return total if total.ndim else float(total)


def profit_upper_bound(vf: ValueFunction, weighting: WeightingFunction | None = None):
    """E[V(0, v, 0)] over the prior v ~ N(0, sigma^2), by one more Gauss-Hermite layer."""
    w = weighting if weighting is not None else vf.rule.weighting
    gx, gw = gauss_hermite(vf.quadrature_nodes)
    v = vf.params.sigma * gx
    if w is None:
        vals = value_V(vf, 0.0, v, 0.0)
    else:
        vals = value_V_nonmarkov(vf.rule, vf.params, w, 0.0, v, 0.0, vf.quadrature_nodes)
    return float(np.sum(np.asarray(vals) * gw))


@dataclass
class ValueResidual:
    hjb_max: float          # V_t + (w^2/2) V_yy + (sigma_z^2/2) V_zz
    gradient_max: float     # V_y + F - H
    hjb: np.ndarray
    gradient: np.ndarray
    h: float


def value_pde_residual(vf: ValueFunction, y_grid, z_grid, t_grid, h: float = 2.0 ** -8) -> ValueResidual:
    """Central finite-difference residuals of the value equation and of V_y = H - F.

    Time stencils are one-sided at t = 0 and must stay below 1.
    """
    y = np.asarray(y_grid, dtype=float)
    z = np.asarray(z_grid, dtype=float)
    t = np.asarray(t_grid, dtype=float)
    if np.any(t < 0) or np.any(t + 2 * h >= 1.0):
        raise DomainError("time stencil must stay inside [0, 1)")
    rule, params = vf.rule, vf.params
    for tk in t:
        if np.any((rule.breakpoints[:-1] > tk - h) & (rule.breakpoints[:-1] < tk + 2 * h)):
            raise DomainError("time stencil straddles a breakpoint")
    Yg, Zg = np.meshgrid(y, z, indexing="ij")
    hjb = np.empty((len(y), len(z), len(t)))
    grad = np.empty_like(hjb)
    V = lambda yy, zz, tt: np.asarray(value_V(vf, yy, zz, tt))
    for k, tk in enumerate(t):
        V0 = V(Yg, Zg, tk)
        Vyy = (V(Yg + h, Zg, tk) - 2 * V0 + V(Yg - h, Zg, tk)) / (h * h)
        Vzz = (V(Yg, Zg + h, tk) - 2 * V0 + V(Yg, Zg - h, tk)) / (h * h)
        Vy = (V(Yg + h, Zg, tk) - V(Yg - h, Zg, tk)) / (2 * h)
        if tk == 0:
            Vt = (-3 * V0 + 4 * V(Yg, Zg, h) - V(Yg, Zg, 2 * h)) / (2 * h)
        else:
            Vt = (V(Yg, Zg, tk + h) - V(Yg, Zg, tk - h)) / (2 * h)
        w2 = float(rule.w2(tk))
        s2 = float(params.vol.sigma_z2(tk))
        hjb[:, :, k] = Vt + 0.5 * w2 * Vyy + 0.5 * s2 * Vzz
        grad[:, :, k] = Vy + fundamental_value(params, Zg, tk, rule.nodes) - price(rule, Yg, tk)
    return ValueResidual(float(np.max(np.abs(hjb))), float(np.max(np.abs(grad))), hjb, grad, h)


def convexity_in_y(vf: ValueFunction, y_grid, z, t, h: float = 2.0 ** -7):
    """Finite-difference V_yy along y, which should be nonnegative."""
    y = np.asarray(y_grid, dtype=float)
    return (value_V(vf, y + h, z, t) - 2 * value_V(vf, y, z, t) + value_V(vf, y - h, z, t)) / (h * h)

