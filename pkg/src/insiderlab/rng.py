"""Counter-based Philox4x32-10 generator and Gaussian draws.

Every normal used by the simulators is a pure function of
(seed, path, step, tag), so paths can be generated in any order, on any
number of threads, and still be bit-identical.

Normals come from a 128-layer ziggurat in which the layer index and the
abscissa use separate 32-bit words. The rare rejections draw further blocks
from counters reserved for that purpose, so the draw stays a pure function
of the counter.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

_MASK = np.uint64(0xFFFFFFFF)
_MA = np.uint64(0xD2511F53)
_MB = np.uint64(0xCD9E8D57)
_WA = np.uint64(0x9E3779B9)
_WB = np.uint64(0xBB67AE85)
_S32 = np.uint64(32)
_INV32 = 2.0 ** -32

#: step counter reserved for the prior draw of v
PRIOR_STEP = 0xFFFFFFFF


@nb.njit(inline="always", cache=True)
def philox(c0, c1, c2, c3, k0, k1):
    """Ten Philox rounds on 32-bit words held in uint64 registers."""
    for _ in range(10):
        p0 = c0 * _MA
        p1 = c2 * _MB
        c0, c1, c2, c3 = ((p1 >> _S32) ^ c1 ^ k0), p1 & _MASK, ((p0 >> _S32) ^ c3 ^ k1), p0 & _MASK
        k0 = (k0 + _WA) & _MASK
        k1 = (k1 + _WB) & _MASK
    return c0, c1, c2, c3


def _ziggurat_tables(n=128, r=3.442619855899, v=9.91256303526217e-3):
    x = np.empty(n + 1)
    f = lambda t: math.exp(-0.5 * t * t)
    x[0] = v / f(r)
    x[1] = r
    for i in range(2, n):
        x[i] = math.sqrt(-2.0 * math.log(v / x[i - 1] + f(x[i - 1])))
    x[n] = 0.0
    ratio = x[1:] / x[:-1]
    return x, np.concatenate([ratio, [0.0]])


ZIG_X, ZIG_R = _ziggurat_tables()
ZIG_TAIL = ZIG_X[1]


@nb.njit(cache=True)
def _zig_slow(u, i, step, tag, path, slot, k0, k1):
    """Tail and wedge branches of the ziggurat, using reserved counters."""
    attempt = 1
    while True:
        a, b, c, d = block(step, tag | (slot << 8) | (attempt << 12), path, k0, k1)
        attempt += 1
        if i == 0:
            # tail beyond the base strip
            while True:
                e1 = (np.float64(a) + 0.5) * _INV32
                e2 = (np.float64(b) + 0.5) * _INV32
                xt = math.log(e1) / ZIG_TAIL
                yt = math.log(e2)
                if -2.0 * yt >= xt * xt:
                    return xt - ZIG_TAIL if u < 0.0 else ZIG_TAIL - xt
                a, b, c, d = block(step, tag | (slot << 8) | (attempt << 12), path, k0, k1)
                attempt += 1
        x = u * ZIG_X[i]
        f0 = math.exp(-0.5 * (ZIG_X[i] * ZIG_X[i] - x * x))
        f1 = math.exp(-0.5 * (ZIG_X[i + 1] * ZIG_X[i + 1] - x * x))
        if f1 + (np.float64(a) + 0.5) * _INV32 * (f0 - f1) < 1.0:
            return x
        u = 2.0 * (np.float64(c) + 0.5) * _INV32 - 1.0
        i = np.int64(d & np.uint64(127))
        if abs(u) < ZIG_R[i]:
            return u * ZIG_X[i]


@nb.njit(inline="always", cache=True)
def _zig(wu, wi, step, tag, path, slot, k0, k1):
    u = 2.0 * (np.float64(wu) + 0.5) * _INV32 - 1.0
    i = np.int64(wi & np.uint64(127))
    if abs(u) < ZIG_R[i]:
        return u * ZIG_X[i]
    return _zig_slow(u, i, step, tag, path, slot, k0, k1)


@nb.njit(inline="always", cache=True)
def block(step, tag, path, key_lo, key_hi):
    """The 4-word Philox output for one (step, tag, path) counter."""
    p = np.uint64(path)
    return philox(np.uint64(step) & _MASK, np.uint64(tag) & _MASK, p & _MASK, (p >> _S32) & _MASK,
                  key_lo, key_hi)


@nb.njit(inline="always", cache=True)
def normals2(step, tag, path, key_lo, key_hi):
    """Two independent standard normals from one counter block."""
    a, b, c, d = block(step, tag, path, key_lo, key_hi)
    return (_zig(a, b, step, tag, path, 1, key_lo, key_hi),
            _zig(c, d, step, tag, path, 2, key_lo, key_hi))


@nb.njit(inline="always", cache=True)
def normals4(step, tag, path, key_lo, key_hi):
    """Four normals: the pair of ``tag`` followed by the pair of ``tag + 2``."""
    n1, n2 = normals2(step, tag, path, key_lo, key_hi)
    n3, n4 = normals2(step, tag + 2, path, key_lo, key_hi)
    return n1, n2, n3, n4


def split_seed(seed: int):
    """64-bit seed to the two key words."""
    seed = int(seed)
    if seed < 0 or seed >= 2 ** 64:
        raise ValueError("seed must lie in [0, 2**64)")
    return np.uint64(seed & 0xFFFFFFFF), np.uint64(seed >> 32)


@nb.njit(cache=True)
def _philox_array(ctr, key):
    out = np.empty((ctr.shape[0], 4), dtype=np.uint64)
    for i in range(ctr.shape[0]):
        r = philox(ctr[i, 0], ctr[i, 1], ctr[i, 2], ctr[i, 3], key[0], key[1])
        out[i, 0], out[i, 1], out[i, 2], out[i, 3] = r
    return out


def philox4x32(counter, key):
    """Reference entry point: one counter (4 words) and key (2 words) to 4 words."""
    ctr = np.asarray(counter, dtype=np.uint64).reshape(-1, 4)
    k = np.asarray(key, dtype=np.uint64).reshape(2)
    out = _philox_array(ctr, k).astype(np.uint32)
    return out[0] if np.ndim(counter) == 1 else out


@nb.njit(cache=True)
def _normals_table(seed_lo, seed_hi, paths, steps, tag):
    out = np.empty((paths.shape[0], steps.shape[0], 4))
    for i in range(paths.shape[0]):
        for j in range(steps.shape[0]):
            n1, n2, n3, n4 = normals4(steps[j], tag, paths[i], seed_lo, seed_hi)
            out[i, j, 0], out[i, j, 1], out[i, j, 2], out[i, j, 3] = n1, n2, n3, n4
    return out


def normals(seed, paths, steps, tag=0):
    """Standard normals indexed by (path, step, slot) for slot 0..3."""
    lo, hi = split_seed(seed)
    return _normals_table(lo, hi, np.asarray(paths, dtype=np.int64),
                          np.asarray(steps, dtype=np.int64), int(tag))
