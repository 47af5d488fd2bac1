"""Quadrature rules and improper-integral classification."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.legendre import leggauss
from scipy import integrate


@lru_cache(maxsize=None)
def gauss_hermite(n: int = 64):
    """Nodes and weights for E[g(N)] with N standard normal."""
    x, w = hermgauss(n)
    x = x * np.sqrt(2.0)
    w = w / np.sqrt(np.pi)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=None)
def gauss_legendre(n: int = 32):
    """Nodes and weights on [0, 1]."""
    x, w = leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def normal_expectation(g, loc=0.0, scale=1.0, n=64):
    """E[g(loc + scale*N)] by Gauss-Hermite; ``loc`` may be an array."""
    x, w = gauss_hermite(n)
    loc = np.asarray(loc, dtype=float)
    pts = loc[..., None] + np.asarray(scale, dtype=float)[..., None] * x
    return np.sum(g(pts) * w, axis=-1)


def geometric_points(a, b, toward="b", levels=40, ratio=0.5):
    """Points between a and b accumulating geometrically at one end."""
    k = np.arange(levels + 1)
    frac = 1.0 - ratio ** k
    if toward == "b":
        pts = a + (b - a) * frac
    else:
        pts = b - (b - a) * frac
        pts = pts[::-1]
    return pts


def _quad(func, lo, hi, points=()):
    # roundoff warnings are expected next to a singular end; the piecewise
    # refinement keeps each piece well conditioned
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(func, lo, hi, points=points if len(points) else None,
                              limit=200, epsabs=0.0, epsrel=1e-11)[0]


def finite_integral(func, a, b, breakpoints=(), ratio=0.5, levels=40):
    """Integral of a bounded but possibly steep integrand on [a, b].

    Pieces shrink geometrically toward both ends so that a steep boundary
    layer is resolved by the adaptive rule.
    """
    mid = 0.5 * (a + b)
    pts = np.concatenate([geometric_points(a, mid, toward="a", levels=levels, ratio=ratio),
                          geometric_points(mid, b, toward="b", levels=levels, ratio=ratio),
                          np.asarray(breakpoints, dtype=float)])
    pts = np.unique(pts[(pts >= a) & (pts <= b)])
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi > lo:
            total += _quad(func, lo, hi)
    return float(total)


@dataclass
class ImproperIntegral:
    """Outcome of a divergence classification."""

    divergent: bool
    value: float
    partial_sums: list = field(default_factory=list)
    reason: str = ""


def classify_improper(func, a, b, singular="b", levels=48, breakpoints=(),
                      blowup=1e8, growth=0.01, log_ratio=0.95, log_run=8):
    """Integrate ``func`` on (a, b) with refinement toward the singular end.

    The interval is cut into pieces whose width halves toward the singular
    end. Each piece is integrated by adaptive Gauss-Kronrod. The integral is
    declared divergent when the partial sums pass ``blowup`` while still
    growing by more than ``growth`` per piece, or when the piece
    contributions stop shrinking (ratio of successive contributions at least
    ``log_ratio`` over ``log_run`` consecutive pieces). The second rule
    catches logarithmic growth, which never reaches ``blowup`` in double
    precision.
    """
    span = b - a
    if span <= 0:
        return ImproperIntegral(False, 0.0, [0.0], "empty")
    # keep pieces wider than rounding noise at the singular end
    scale = max(abs(a), abs(b), 1.0)
    max_levels = int(min(levels, np.floor(np.log2(span / (64 * np.finfo(float).eps * scale)))))
    pts = geometric_points(a, b, toward=singular, levels=max(max_levels, 1))
    if singular == "b":
        pieces = list(zip(pts[:-1], pts[1:]))
    else:
        pieces = list(zip(pts[:-1], pts[1:]))[::-1]
    bps = np.asarray(breakpoints, dtype=float)
    total = 0.0
    sums = []
    incs = []
    for lo, hi in pieces:
        inner = bps[(bps > lo) & (bps < hi)]
        val = abs(_quad(func, lo, hi, inner))
        prev = total
        total += val
        sums.append(total)
        incs.append(val)
        if not np.isfinite(total):
            return ImproperIntegral(True, np.inf, sums, "non-finite partial sum")
        if total > blowup and prev > 0 and val > growth * prev:
            return ImproperIntegral(True, np.inf, sums, "partial sums exceed bound and keep growing")
        if len(incs) > log_run:
            tail = np.asarray(incs[-log_run - 1:])
            if tail[0] > 0 and np.all(tail[1:] >= log_ratio * tail[:-1]) and val > 1e-12 * total:
                return ImproperIntegral(True, np.inf, sums, "contributions stop shrinking")
    # geometric tail correction from the last two contributions
    if len(incs) >= 2 and incs[-2] > 0:
        r = incs[-1] / incs[-2]
        if r < 1:
            total += incs[-1] * r / (1.0 - r)
    return ImproperIntegral(False, float(total), sums, "converged")
