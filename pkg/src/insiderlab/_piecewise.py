"""Exact piecewise-quadratic functions of time.

Cumulative variances of piecewise-linear schedules, and every denominator built
from them, are piecewise quadratic. Keeping them in this form gives exact values,
exact zeros and exact interior minima.
"""

from __future__ import annotations

import numpy as np


class PiecewiseQuadratic:
    """f(t) = c0 + c1*u + c2*u**2 with u = t - breaks[i] on [breaks[i], breaks[i+1]]."""

    def __init__(self, breaks, coefs):
        breaks = np.asarray(breaks, dtype=float)
        coefs = np.asarray(coefs, dtype=float).reshape(-1, 3)
        if breaks.ndim != 1 or len(breaks) != len(coefs) + 1:
            raise ValueError("need len(breaks) == len(coefs) + 1")
        if np.any(np.diff(breaks) <= 0):
            raise ValueError("breaks must be strictly increasing")
        self.breaks = breaks
        self.coefs = coefs

    @classmethod
    def linear(cls, c0, c1, lo=0.0, hi=1.0):
        return cls([lo, hi], [[c0 + c1 * lo, c1, 0.0]])

    @classmethod
    def constant(cls, c, lo=0.0, hi=1.0):
        return cls([lo, hi], [[c, 0.0, 0.0]])

    @classmethod
    def integral_of_linear_pieces(cls, segments, start=0.0):
        """Antiderivative (from the first break) of a piecewise-linear rate.

        ``segments`` holds (a, b, value_at_a, value_at_b) with a < b, contiguous.
        """
        breaks = [segments[0][0]]
        coefs = []
        acc = start
        for a, b, va, vb in segments:
            slope = (vb - va) / (b - a)
            coefs.append([acc, va, 0.5 * slope])
            acc += 0.5 * (va + vb) * (b - a)
            breaks.append(b)
        return cls(breaks, coefs)

    @property
    def lo(self):
        return float(self.breaks[0])

    @property
    def hi(self):
        return float(self.breaks[-1])

    def _piece(self, t, side):
        t = np.asarray(t, dtype=float)
        if side == "left":
            idx = np.searchsorted(self.breaks, t, side="left") - 1
        else:
            idx = np.searchsorted(self.breaks, t, side="right") - 1
        return np.clip(idx, 0, len(self.coefs) - 1)

    def __call__(self, t, side="right"):
        t = np.asarray(t, dtype=float)
        i = self._piece(t, side)
        u = t - self.breaks[i]
        c = self.coefs[i]
        out = c[..., 0] + u * (c[..., 1] + u * c[..., 2])
        return float(out) if out.ndim == 0 else out

    def derivative(self, t, side="right"):
        t = np.asarray(t, dtype=float)
        i = self._piece(t, side)
        u = t - self.breaks[i]
        c = self.coefs[i]
        out = c[..., 1] + 2.0 * u * c[..., 2]
        return float(out) if out.ndim == 0 else out

    def _rebased(self, breaks):
        """Coefficients of self re-expanded on a refinement of its breaks."""
        breaks = np.asarray(breaks, dtype=float)
        coefs = np.empty((len(breaks) - 1, 3))
        for j in range(len(breaks) - 1):
            a, b = breaks[j], breaks[j + 1]
            i = int(self._piece(0.5 * (a + b), "right"))
            c0, c1, c2 = self.coefs[i]
            d = a - self.breaks[i]
            coefs[j] = [c0 + c1 * d + c2 * d * d, c1 + 2.0 * c2 * d, c2]
        return coefs

    def _merged_breaks(self, other):
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        b = np.union1d(self.breaks, other.breaks)
        b = b[(b >= lo) & (b <= hi)]
        # drop breaks closer than rounding noise
        keep = np.concatenate([[True], np.diff(b) > 1e-15])
        return b[keep]

    def __add__(self, other):
        if not isinstance(other, PiecewiseQuadratic):
            other = PiecewiseQuadratic.constant(float(other), self.lo, self.hi)
        b = self._merged_breaks(other)
        return PiecewiseQuadratic(b, self._rebased(b) + other._rebased(b))

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self):
        return PiecewiseQuadratic(self.breaks, -self.coefs)

    def __sub__(self, other):
        if not isinstance(other, PiecewiseQuadratic):
            other = PiecewiseQuadratic.constant(float(other), self.lo, self.hi)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scaled(self, k):
        return PiecewiseQuadratic(self.breaks, k * self.coefs)

    def piece_roots(self, i, closed=True):
        """Zeros of piece ``i`` inside its own interval."""
        a, b = self.breaks[i], self.breaks[i + 1]
        c0, c1, c2 = self.coefs[i]
        L = b - a
        scale = max(abs(c0), abs(c1) * L, abs(c2) * L * L, 1e-300)
        roots = []
        if abs(c2) * L * L <= 1e-14 * scale:
            if abs(c1) * L > 1e-14 * scale:
                roots.append(-c0 / c1)
            elif abs(c0) <= 1e-14:
                roots.append(0.0)
        else:
            disc = c1 * c1 - 4.0 * c2 * c0
            if disc < 0 and disc > -1e-14 * c1 * c1:
                disc = 0.0
            if disc >= 0:
                sq = np.sqrt(disc)
                # stable quadratic formula
                q = -0.5 * (c1 + np.copysign(sq, c1)) if c1 != 0 else -0.5 * sq
                cand = []
                if q != 0:
                    cand.append(q / c2)
                    cand.append(c0 / q)
                else:
                    cand.append(0.0)
                roots.extend(cand)
        tol = 1e-13 * max(L, 1.0)
        out = []
        for u in roots:
            if (closed and -tol <= u <= L + tol) or (not closed and tol < u < L - tol):
                out.append(float(a + min(max(u, 0.0), L)))
        return sorted(set(out))

    def roots(self, lo=None, hi=None):
        lo = self.lo if lo is None else lo
        hi = self.hi if hi is None else hi
        out = []
        for i in range(len(self.coefs)):
            for r in self.piece_roots(i):
                if lo - 1e-15 <= r <= hi + 1e-15:
                    out.append(r)
        out = sorted(out)
        dedup = []
        for r in out:
            if not dedup or r - dedup[-1] > 1e-13:
                dedup.append(r)
        return dedup

    def critical_points(self, lo, hi):
        """Interior stationary points of each piece inside (lo, hi)."""
        pts = []
        for i in range(len(self.coefs)):
            a, b = self.breaks[i], self.breaks[i + 1]
            c0, c1, c2 = self.coefs[i]
            if c2 != 0:
                t = a - c1 / (2.0 * c2)
                if a < t < b and lo < t < hi:
                    pts.append(float(t))
        return pts

    def minimum_on(self, lo, hi):
        """Exact minimum over [lo, hi] using endpoints, breaks and stationary points."""
        cand = [lo, hi]
        cand += [float(b) for b in self.breaks if lo < b < hi]
        cand += self.critical_points(lo, hi)
        vals = []
        for t in cand:
            vals.append(self(t, "right"))
            vals.append(self(t, "left"))
        k = int(np.argmin(vals))
        return float(vals[k]), float(cand[k // 2])
