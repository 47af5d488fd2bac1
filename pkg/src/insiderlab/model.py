"""Market parameters, exact variance schedules and equilibrium condition checks."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ._piecewise import PiecewiseQuadratic
from .errors import ConstructionError, DomainError, SingularityError
from .quadrature import classify_improper, finite_integral, gauss_hermite, gauss_legendre

NORMALIZATION_TOL = 1e-12
RESIDUAL_TOL = 1e-10
PASS, FAIL, NA = "pass", "fail", "inapplicable"


def _check_time(t, lo=0.0, hi=1.0):
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < lo) or np.any(t > hi):
        raise DomainError(f"time outside [{lo}, {hi}]: {t}")
    return t


class VolatilitySpec:
    """Piecewise-linear schedule for sigma_z^2.

    ``knots`` is a sequence of (time, sigma_z_squared). Times run from 0 to 1
    and increase strictly, except that one time may be repeated once to
    place a jump in the schedule (the second value holds from that time on).
    """

    def __init__(self, knots):
        knots = [(float(t), float(v)) for t, v in knots]
        if len(knots) < 2:
            raise DomainError("need at least two knots")
        times = np.array([k[0] for k in knots])
        vals = np.array([k[1] for k in knots])
        if times[0] != 0.0 or times[-1] != 1.0:
            raise DomainError("knot times must start at 0 and end at 1")
        gaps = np.diff(times)
        if np.any(gaps < 0) or np.any(~np.isfinite(vals)):
            raise DomainError("knot times must be nondecreasing and values finite")
        if np.any((gaps[1:] == 0) & (gaps[:-1] == 0)):
            raise DomainError("a knot time may be repeated at most once")
        if gaps[0] == 0 or gaps[-1] == 0:
            raise DomainError("jumps at t=0 or t=1 are not representable")
        if np.any(vals < 0):
            raise DomainError("sigma_z^2 must be nonnegative")
        self.knots = tuple(knots)
        self._times = times
        self._vals = vals
        segs = [(times[i], times[i + 1], vals[i], vals[i + 1])
                for i in range(len(times) - 1) if gaps[i] > 0]
        self.Sigma = PiecewiseQuadratic.integral_of_linear_pieces(segs)
        if not np.isfinite(self.Sigma(1.0)):
            raise DomainError("Sigma_z(1) is not finite")
        self.jump_times = tuple(float(times[i]) for i in range(len(gaps)) if gaps[i] == 0)

    @classmethod
    def constant(cls, c):
        return cls([(0.0, c), (1.0, c)])

    def sigma_z2(self, t, side="right"):
        """sigma_z^2 at t; at a jump, ``side`` picks the one-sided limit."""
        t = np.asarray(t, dtype=float)
        segs = self.Sigma
        out = segs.derivative(t, side=side)
        return out

    def cumulative(self, t):
        return self.Sigma(_check_time(t))

    def constant_value(self):
        """The constant value of sigma_z^2, or None if it varies."""
        if np.all(self._vals == self._vals[0]):
            return float(self._vals[0])
        return None

    def to_dict(self):
        return {"knots": [list(k) for k in self.knots]}

    def __eq__(self, other):
        return isinstance(other, VolatilitySpec) and self.knots == other.knots

    def __repr__(self):
        return f"VolatilitySpec({list(self.knots)!r})"


PAYOFF_FAMILIES = ("identity", "affine", "cubic", "exponential", "table")


class PayoffSpec:
    """Terminal payoff f of the risky asset.

    Families: ``identity``; ``affine`` with params ``a > 0, b``; ``cubic``
    (x**3); ``exponential`` with ``scale > 0, rate > 0`` (scale*exp(rate*x));
    ``table`` with sorted ``x`` and strictly increasing ``f`` values,
    linear in between and constant outside.
    """

    def __init__(self, family="identity", params=None):
        if family not in PAYOFF_FAMILIES:
            raise DomainError(f"unknown payoff family {family!r}")
        params = dict(params or {})
        self.family = family
        if family == "affine":
            a, b = float(params.get("a", 1.0)), float(params.get("b", 0.0))
            if not a > 0:
                raise DomainError("affine payoff needs a > 0")
            params = {"a": a, "b": b}
        elif family == "exponential":
            s, r = float(params.get("scale", 1.0)), float(params.get("rate", 1.0))
            if not (s > 0 and r > 0):
                raise DomainError("exponential payoff needs scale > 0 and rate > 0")
            params = {"scale": s, "rate": r}
        elif family == "table":
            x = np.asarray(params.get("x", []), dtype=float)
            f = np.asarray(params.get("f", []), dtype=float)
            if len(x) < 2 or len(x) != len(f):
                raise DomainError("table payoff needs matching x and f with at least two points")
            if np.any(np.diff(x) <= 0) or np.any(np.diff(f) <= 0):
                raise DomainError("table payoff needs strictly increasing x and f")
            params = {"x": x.tolist(), "f": f.tolist()}
            self._x, self._f = x, f
            # antiderivative at the table nodes, starting from x[0]
            self._F = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(x))])
        else:
            params = {}
        self.params = params

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        fam = self.family
        if fam == "identity":
            return x * 1.0
        if fam == "affine":
            return self.params["a"] * x + self.params["b"]
        if fam == "cubic":
            return x ** 3
        if fam == "exponential":
            with np.errstate(over="ignore"):
                return self.params["scale"] * np.exp(self.params["rate"] * x)
        return np.interp(x, self._x, self._f)

    def antiderivative(self, x):
        """A fixed antiderivative A with A' = f."""
        x = np.asarray(x, dtype=float)
        fam = self.family
        if fam == "identity":
            return 0.5 * x * x
        if fam == "affine":
            return 0.5 * self.params["a"] * x * x + self.params["b"] * x
        if fam == "cubic":
            return 0.25 * x ** 4
        if fam == "exponential":
            s, r = self.params["scale"], self.params["rate"]
            with np.errstate(over="ignore"):
                return s / r * np.exp(r * x)
        xs, fs, Fs = self._x, self._f, self._F
        xc = np.clip(x, xs[0], xs[-1])
        i = np.clip(np.searchsorted(xs, xc, side="right") - 1, 0, len(xs) - 2)
        u = xc - xs[i]
        slope = (fs[i + 1] - fs[i]) / (xs[i + 1] - xs[i])
        inside = Fs[i] + fs[i] * u + 0.5 * slope * u * u
        return inside + np.where(x < xs[0], fs[0] * (x - xs[0]), 0.0) \
            + np.where(x > xs[-1], fs[-1] * (x - xs[-1]), 0.0)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        fam = self.family
        if fam == "identity":
            return np.ones_like(x)
        if fam == "affine":
            return np.full_like(x, self.params["a"])
        if fam == "cubic":
            return 3.0 * x * x
        if fam == "exponential":
            return self.params["rate"] * self(x)
        xs, fs = self._x, self._f
        i = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(xs) - 2)
        slope = (fs[i + 1] - fs[i]) / (xs[i + 1] - xs[i])
        return np.where((x < xs[0]) | (x > xs[-1]), 0.0, slope)

    @property
    def evaluation_range(self):
        if self.family == "table":
            return float(self._x[0]), float(self._x[-1])
        return -10.0, 10.0

    def is_increasing(self, n=4001):
        if self.family == "table":
            return True  # enforced at construction
        lo, hi = self.evaluation_range
        v = self(np.linspace(lo, hi, n))
        return bool(np.all(np.diff(v) > 0))

    def second_moment(self, n=64):
        """E[f(N)^2] for N standard normal."""
        x, w = gauss_hermite(n)
        return float(np.sum(self(x) ** 2 * w))

    def to_dict(self):
        return {"family": self.family, "params": dict(self.params)}

    def __eq__(self, other):
        return isinstance(other, PayoffSpec) and self.to_dict() == other.to_dict()

    def __repr__(self):
        return f"PayoffSpec({self.family!r}, {self.params!r})"


class ModelParams:
    """Prior dispersion sigma, firm volatility schedule and payoff.

    The constructor enforces sigma^2 = 1 - Sigma_z(1) to 1e-12; use
    :meth:`normalized` to derive sigma from the schedule.
    """

    def __init__(self, sigma, vol: VolatilitySpec, payoff: PayoffSpec | None = None):
        sigma = float(sigma)
        if not sigma > 0:
            raise DomainError("sigma must be positive")
        payoff = payoff if payoff is not None else PayoffSpec("identity")
        gap = sigma * sigma - (1.0 - vol.Sigma(1.0))
        if abs(gap) > NORMALIZATION_TOL:
            raise DomainError(f"normalization sigma^2 = 1 - Sigma_z(1) violated by {gap:.3e}")
        self.sigma = sigma
        self.vol = vol
        self.payoff = payoff
        self.sigma2 = sigma * sigma
        self.D = vol.Sigma + (self.sigma2 - PiecewiseQuadratic.linear(0.0, 1.0))

    @classmethod
    def normalized(cls, vol, payoff=None):
        s2 = 1.0 - vol.Sigma(1.0)
        if not s2 > 0:
            raise DomainError("Sigma_z(1) >= 1 leaves no room for a positive prior variance")
        return cls(np.sqrt(s2), vol, payoff)

    def to_dict(self):
        return {"sigma": self.sigma, "vol": self.vol.to_dict(), "payoff": self.payoff.to_dict()}

    def __repr__(self):
        return f"ModelParams(sigma={self.sigma!r}, vol={self.vol!r}, payoff={self.payoff!r})"


class WeightingFunction:
    """Piecewise-constant weights on the half-open intervals (t_{i-1}, t_i]."""

    def __init__(self, partition: Sequence[float], weights: Sequence[float]):
        p = np.asarray(partition, dtype=float)
        w = np.asarray(weights, dtype=float)
        if p.ndim != 1 or len(p) < 2 or p[0] != 0.0 or p[-1] != 1.0:
            raise DomainError("partition must run from 0 to 1")
        if np.any(np.diff(p) <= 0):
            raise DomainError("partition intervals must have positive length")
        if len(w) != len(p) - 1:
            raise DomainError("need one weight per interval")
        if np.any(~(w > 0)) or np.any(~np.isfinite(w)):
            raise DomainError("weights must be positive and finite")
        self.partition = p
        self.weights = w
        self.G = PiecewiseQuadratic(p, np.column_stack([
            np.concatenate([[0.0], np.cumsum(w[:-1] ** 2 * np.diff(p)[:-1])]),
            w ** 2, np.zeros_like(w)]))

    @classmethod
    def markov(cls):
        return cls([0.0, 1.0], [1.0])

    @property
    def n(self):
        return len(self.weights)

    @property
    def breakpoints(self):
        return self.partition[1:]

    def interval_index(self, t):
        """0-based index i with t in (t_i, t_{i+1}]; t=0 maps to 0."""
        t = np.asarray(t, dtype=float)
        i = np.searchsorted(self.partition, t, side="left") - 1
        return np.clip(i, 0, self.n - 1)

    def __call__(self, t):
        return self.weights[self.interval_index(t)]

    def integral_sq(self, a, b):
        """int_a^b g^2."""
        return self.G(b) - self.G(a)

    def rho(self, t):
        """Remaining variance int_t^1 g^2."""
        return self.G(1.0) - self.G(t)

    def is_increasing(self):
        return bool(np.all(np.diff(self.weights) > 0))

    def to_dict(self):
        return {"partition": self.partition.tolist(), "weights": self.weights.tolist()}

    def __repr__(self):
        return f"WeightingFunction({self.partition.tolist()!r}, {self.weights.tolist()!r})"


# ---------------------------------------------------------------- basic functions

def cumulative_variance(vol: VolatilitySpec, t):
    """Exact Sigma_z(t)."""
    return vol.cumulative(t)


def markov_denominator(params: ModelParams, t):
    """Sigma_z(t) - t + sigma^2."""
    return params.D(_check_time(t))


def nonmarkov_denominator(params: ModelParams, w: WeightingFunction) -> PiecewiseQuadratic:
    """Sigma_z(t) + sigma^2 - int_0^t g^2 as an exact piecewise quadratic."""
    return params.vol.Sigma + (params.sigma2 - w.G)


def _segments(lo, hi, breaks, singular=1.0, levels=62):
    """Cut [lo, hi] at breaks and at points accumulating toward ``singular``."""
    geo = singular - 2.0 ** -np.arange(1, levels)
    pts = np.concatenate([[lo, hi], breaks, geo])
    pts = np.unique(pts[(pts >= lo) & (pts <= hi)])
    return pts


def _first_nonpositive(D: PiecewiseQuadratic, t):
    """First time in [0, t] where D <= 0, or None."""
    if D(0.0) <= 0:
        return 0.0
    roots = [r for r in D.roots(0.0, t) if r <= t]
    return roots[0] if roots else None


def _log_lambda_and_xi(params, t, n=30, want_xi=True):
    """-log(lambda(t)) and Xi(t) by composite Gauss-Legendre on refined pieces."""
    D = params.D
    x, wq = gauss_legendre(n)
    pts = _segments(0.0, t, D.breaks)
    L = 0.0
    xi = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        h = b - a
        if h <= 0:
            continue
        s = a + h * x
        if want_xi:
            # L at each outer node by an inner rule on [a, s_j]
            inner = a + (s - a)[:, None] * x[None, :]
            Ls = L + (s - a) * np.sum(wq / D(inner.ravel()).reshape(inner.shape), axis=1)
            rate = 1.0 + params.vol.sigma_z2(s)
            xi += h * np.sum(wq * rate * np.exp(2.0 * Ls))
        L += h * np.sum(wq / D(s))
    return L, xi


def lambda_of_t(params: ModelParams, t):
    """exp(-int_0^t 1/D(s) ds) for the Markov denominator D."""
    t = float(_check_time(t))
    if t >= 1.0:
        raise DomainError("lambda is defined for t < 1")
    bad = _first_nonpositive(params.D, t)
    if bad is not None:
        raise SingularityError(f"denominator is nonpositive at t={bad:.12g}", time=bad)
    if t == 0.0:
        return 1.0
    L, _ = _log_lambda_and_xi(params, t, want_xi=False)
    return float(np.exp(-L))


def xi_of_t(params: ModelParams, t):
    """int_0^t (1 + sigma_z^2)/lambda^2 ds."""
    t = float(_check_time(t))
    if t >= 1.0:
        raise DomainError("Xi is defined for t < 1")
    bad = _first_nonpositive(params.D, t)
    if bad is not None:
        raise SingularityError(f"denominator is nonpositive at t={bad:.12g}", time=bad)
    if t == 0.0:
        return 0.0
    _, xi = _log_lambda_and_xi(params, t)
    return float(xi)


# ---------------------------------------------------------------- reports

@dataclass
class AssumptionReport:
    payoff_increasing: str = NA
    payoff_square_integrable: str = NA
    finite_variance: str = NA
    no_zero_before_one: str = NA
    square_integrable_to_one: str = NA
    reciprocal_diverges: str = NA
    speed_of_adjustment: str = NA
    signal_precision: str = NA
    denominator_nonnegative: str = NA
    limit_condition: str = NA
    t_star: float | None = None
    denominator_min: float = float("nan")
    denominator_argmin: float = float("nan")
    first_nonpositive: float | None = None
    payoff_second_moment: float = float("nan")
    samples: list = field(default_factory=list)

    @property
    def assumption_21(self):
        return PASS if self.payoff_increasing == PASS and self.payoff_square_integrable == PASS else FAIL

    @property
    def assumption_22(self):
        return self.finite_variance

    @property
    def assumption_31(self):
        if self.no_zero_before_one != PASS:
            return FAIL
        ok = PASS in (self.square_integrable_to_one, self.reciprocal_diverges)
        return PASS if ok else FAIL

    @property
    def assumption_32(self):
        ok = self.signal_precision == PASS and self.denominator_nonnegative == PASS
        return PASS if ok else FAIL

    @property
    def verdicts(self):
        return {
            "assumption_2.1": self.assumption_21,
            "assumption_2.2": self.assumption_22,
            "assumption_3.1": self.assumption_31,
            "assumption_3.2": self.assumption_32,
            "limit_condition": self.limit_condition,
        }

    @property
    def failed(self):
        return [k for k, v in self.verdicts.items() if v == FAIL]

    @property
    def all_pass(self):
        return not self.failed

    def to_dict(self):
        d = asdict(self)
        d["verdicts"] = self.verdicts
        d["all_pass"] = self.all_pass
        return d


@dataclass
class ConditionReport:
    interior_positive: str = NA
    breakpoint_residual: str = NA
    square_integrable: str = NA
    reciprocal_diverges: str = NA
    weights_increasing: str = NA
    residuals: list = field(default_factory=list)
    interior_minima: list = field(default_factory=list)
    interior_roots: list = field(default_factory=list)
    lower_endpoint_singular: list = field(default_factory=list)
    sum_of_squares: float = float("nan")
    integral_of_squares: float = float("nan")

    @property
    def verdicts(self):
        return {
            "condition_4.9": self.interior_positive,
            "condition_4.10": self.breakpoint_residual,
            "condition_4.11": self.square_integrable,
            "condition_4.12": self.reciprocal_diverges,
            "increasing_weights": self.weights_increasing,
        }

    @property
    def failed(self):
        return [k for k, v in self.verdicts.items() if v == FAIL]

    @property
    def all_pass(self):
        return not self.failed

    def to_dict(self):
        d = asdict(self)
        d["verdicts"] = self.verdicts
        d["all_pass"] = self.all_pass
        return d


def _verdict(ok):
    return PASS if ok else FAIL


def limit_condition_samples(params: ModelParams, kmin=4, kmax=20):
    """lambda^2 * Xi * log log Xi at t = 1 - 2^-k."""
    out = []
    for k in range(kmin, kmax + 1):
        t = 1.0 - 2.0 ** -k
        L, xi = _log_lambda_and_xi(params, t)
        lam = np.exp(-L)
        val = lam * lam * xi * np.log(np.log(xi)) if xi > np.e else float("nan")
        out.append({"k": k, "t": t, "lambda": float(lam), "xi": float(xi), "value": float(val)})
    return out


def _eventually_decreasing_below(vals, tol):
    vals = np.asarray(vals, dtype=float)
    if len(vals) == 0 or not np.isfinite(vals[-1]):
        return False
    # longest finite, strictly decreasing tail
    j = len(vals) - 1
    while j > 0 and np.isfinite(vals[j - 1]) and vals[j - 1] > vals[j]:
        j -= 1
    return bool(len(vals) - j >= 3 and vals[-1] < tol)


def check_assumptions(params: ModelParams, probe_grid: int = 20, tol: float = 1e-3) -> AssumptionReport:
    """Verdicts for the payoff, variance, filtering and signal-precision assumptions."""
    rep = AssumptionReport()
    f = params.payoff
    m2 = f.second_moment(64)
    m2_fine = f.second_moment(128)
    rep.payoff_second_moment = m2
    rep.payoff_increasing = _verdict(f.is_increasing())
    rep.payoff_square_integrable = _verdict(
        np.isfinite(m2) and abs(m2 - m2_fine) <= 1e-6 * max(1.0, abs(m2_fine)))
    rep.finite_variance = _verdict(np.isfinite(params.vol.Sigma(1.0)))

    D = params.D
    dmin, targ = D.minimum_on(0.0, 1.0)
    rep.denominator_min, rep.denominator_argmin = dmin, targ
    rep.denominator_nonnegative = _verdict(dmin >= -RESIDUAL_TOL)

    roots = [r for r in D.roots(0.0, 1.0) if r < 1.0 - 1e-12]
    first = 0.0 if D(0.0) <= 0 else (roots[0] if roots else None)
    rep.first_nonpositive = first
    inv2 = lambda s: 1.0 / D(s) ** 2
    inv1 = lambda s: 1.0 / abs(D(s))
    if first is not None:
        # the squared reciprocal blows up at the first zero
        res = classify_improper(inv2, 0.0, first, breakpoints=D.breaks) if first > 0 else None
        rep.no_zero_before_one = FAIL if (res is None or res.divergent) else PASS
        rep.square_integrable_to_one = FAIL
        rep.reciprocal_diverges = NA
    else:
        rep.no_zero_before_one = PASS
        r2 = classify_improper(inv2, 0.0, 1.0, breakpoints=D.breaks)
        r1 = classify_improper(inv1, 0.0, 1.0, breakpoints=D.breaks)
        rep.square_integrable_to_one = _verdict(not r2.divergent)
        rep.reciprocal_diverges = _verdict(r1.divergent)
    rep.speed_of_adjustment = rep.assumption_31

    # t*: D > 0 on [t*, 1) with no jump of sigma_z there
    near_one = D(1.0 - 2.0 ** -30) > 0
    if near_one:
        last = max([r for r in roots], default=None)
        tstar = 0.0 if (last is None and D(0.0) > 0) else (last if last is not None else 0.0)
        jumps = [j for j in params.vol.jump_times if j >= tstar]
        if jumps:
            tstar = max(jumps)
            ok = D(tstar) > 0
        else:
            ok = True
        rep.t_star = float(tstar) if ok else None
        rep.signal_precision = _verdict(ok)
    else:
        rep.signal_precision = FAIL

    if rep.assumption_31 == PASS and rep.square_integrable_to_one == FAIL:
        samples = limit_condition_samples(params, 4, probe_grid)
        rep.samples = samples
        rep.limit_condition = _verdict(_eventually_decreasing_below([s["value"] for s in samples], tol))
    return rep


def construct_weighting(params: ModelParams, partition: Sequence[float]) -> WeightingFunction:
    """Piecewise-constant g with zero residual at every breakpoint."""
    p = np.asarray(partition, dtype=float)
    if p.ndim != 1 or len(p) < 2 or p[0] != 0.0 or p[-1] != 1.0:
        raise DomainError("partition must run from 0 to 1")
    if np.any(np.diff(p) <= 0):
        raise DomainError("partition has a zero-length interval")
    S = params.vol.Sigma(p)
    a2 = np.empty(len(p) - 1)
    a2[0] = (S[1] + params.sigma2) / p[1]
    a2[1:] = np.diff(S)[1:] / np.diff(p)[1:]
    if np.any(a2 <= 0):
        bad = [int(i) + 1 for i in np.nonzero(a2 <= 0)[0]]
        raise ConstructionError(f"weights not positive at intervals {bad}", bad)
    alpha = np.sqrt(a2)
    bad = [i + 2 for i in range(len(alpha) - 1)
           if not alpha[i + 1] > alpha[i] * (1.0 + 1e-12)]
    if bad:
        raise ConstructionError(f"weights not strictly increasing at intervals {bad}", bad)
    return WeightingFunction(p, alpha)


def check_nonmarkovian_conditions(params: ModelParams, w: WeightingFunction,
                                  probe_grid: int = 20) -> ConditionReport:
    """Verdicts for interior positivity, breakpoint revelation and integrability."""
    rep = ConditionReport()
    D = nonmarkov_denominator(params, w)
    p = w.partition
    rep.sum_of_squares = float(np.sum(w.weights ** 2))
    rep.integral_of_squares = float(w.G(1.0))
    rep.weights_increasing = _verdict(w.is_increasing())

    rep.residuals = [float(D(t, "left")) for t in p[1:]]
    rep.breakpoint_residual = _verdict(all(abs(r) <= RESIDUAL_TOL for r in rep.residuals))

    pos = True
    for a, b in zip(p[:-1], p[1:]):
        L = b - a
        tol = 1e-12 * max(L, 1.0)
        inner = [r for r in D.roots(a, b) if a + tol < r < b - tol]
        rep.interior_roots.append(inner)
        mn, at = D.minimum_on(a + L * 2.0 ** -probe_grid, b - L * 2.0 ** -probe_grid)
        rep.interior_minima.append({"min": mn, "at": at})
        if inner or not D(0.5 * (a + b)) > 0:
            pos = False
    rep.interior_positive = _verdict(pos)

    if not pos:
        rep.square_integrable = FAIL
        rep.reciprocal_diverges = NA
        return rep

    sq_ok = True
    div_ok = True
    inv2 = lambda s: 1.0 / D(s) ** 2
    inv1 = lambda s: 1.0 / abs(D(s))
    for a, b in zip(p[:-1], p[1:]):
        L = b - a
        singular_low = D(a, "right") <= RESIDUAL_TOL
        rep.lower_endpoint_singular.append(bool(singular_low))
        # finiteness on [start, t] for t < t_i, probed at t = b - L*2^-probe
        start = a + L * 2.0 ** -probe_grid if singular_low else a
        stop = b - L * 2.0 ** -probe_grid
        val = finite_integral(inv2, start, stop, breakpoints=D.breaks)
        sq_ok &= bool(np.isfinite(val))
        r1 = classify_improper(inv1, 0.5 * (a + b), b, singular="b", breakpoints=D.breaks)
        div_ok &= r1.divergent
    rep.square_integrable = _verdict(sq_ok)
    rep.reciprocal_diverges = _verdict(div_ok)
    return rep
