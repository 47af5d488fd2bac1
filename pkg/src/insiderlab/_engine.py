"""Compiled path kernels.

Both kernels take fully precomputed per-step tables (built in
:mod:`insiderlab.dynamics`) and loop over paths then steps. All strategies of
an ensemble share the same draws, so their wealth differences carry common
random numbers.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

from .rng import PRIOR_STEP, normals2, normals4

# strategy kinds
EQUILIBRIUM, TARGET, ZERO, HOLD = 0, 1, 2, 3
# payoff codes
P_IDENTITY, P_AFFINE, P_CUBIC, P_EXP, P_TABLE = 0, 1, 2, 3, 4
# status codes
OK, SINGULAR, NONFINITE = 0, 1, 2


@nb.njit(inline="always", cache=True)
def interp(x, tx, tf):
    """Piecewise-linear interpolation with flat extrapolation, like np.interp."""
    n = tx.shape[0]
    if x <= tx[0]:
        return tf[0]
    if x >= tx[n - 1]:
        return tf[n - 1]
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if tx[mid] <= x:
            lo = mid
        else:
            hi = mid
    w = (x - tx[lo]) / (tx[hi] - tx[lo])
    return tf[lo] + w * (tf[hi] - tf[lo])


@nb.njit(inline="always", cache=True)
def _f(code, par, tx, tf, x):
    if code == P_IDENTITY:
        return x
    if code == P_AFFINE:
        return par[0] * x + par[1]
    if code == P_CUBIC:
        return x * x * x
    if code == P_EXP:
        return par[0] * math.exp(par[1] * x)
    return interp(x, tx, tf)


@nb.njit(inline="always", cache=True)
def price_of(code, par, tx, tf, gx, gw, y, rho):
    """H(y) with remaining variance rho."""
    if code == P_IDENTITY:
        return y
    if code == P_AFFINE:
        return par[0] * y + par[1]
    if code == P_CUBIC:
        return y * y * y + 3.0 * y * rho
    if code == P_EXP:
        return par[0] * math.exp(par[1] * y + 0.5 * par[1] * par[1] * rho)
    if rho <= 0.0:
        return interp(y, tx, tf)
    sd = math.sqrt(rho)
    acc = 0.0
    for g in range(gx.shape[0]):
        acc += gw[g] * interp(y + sd * gx[g], tx, tf)
    return acc


@nb.njit(nogil=True, cache=True)
def _price_row(pcode, ppar, ptx, ptf, gx, gw, xi, rho, out):
    """Prices along one recorded xi row, dispatching on the payoff once."""
    n = xi.shape[0]
    if pcode == P_IDENTITY:
        for k in range(n):
            out[k] = xi[k]
    elif pcode == P_AFFINE:
        for k in range(n):
            out[k] = ppar[0] * xi[k] + ppar[1]
    elif pcode == P_CUBIC:
        for k in range(n):
            out[k] = xi[k] * xi[k] * xi[k] + 3.0 * xi[k] * rho[k]
    else:
        for k in range(n):
            out[k] = price_of(pcode, ppar, ptx, ptf, gx, gw, xi[k], rho[k])


@nb.njit(nogil=True, cache=True)
def euler_kernel(p0, npaths, key_lo, key_hi, sigma,
                 dt, sdt, sdz, alpha, den, reset, tc_T, rho,
                 brk_node, rec_node,
                 kind, q0, jump_step, jump_size, kappa,
                 pcode, ppar, ptx, ptf, fcode, fpar, ftx, ftf, gx, gw,
                 chase_mode, chase_sd, chase_int, chase_z, chase_tab, need_w,
                 out_wealth, out_qv, out_gap, out_rec, out_recz, out_v,
                 out_status, out_node):
    m = dt.shape[0]
    ns = kind.shape[0]
    nb_ = brk_node.shape[0]
    nr = rec_node.shape[0]
    theta = np.empty(ns)
    Y = np.empty(ns)
    xi = np.empty(ns)
    Ya = np.empty(ns)
    QV = np.empty(ns)
    # the step loop only records theta and xi; prices are filled in afterwards
    th_buf = np.empty((ns, m + 1))
    xi_buf = np.empty((ns, m + 1))
    p_buf = np.empty(m + 1)
    zr = np.empty((nr, 3))
    yr = np.empty((nr, ns))
    for ip in range(npaths):
        path = p0 + ip
        nv, _ = normals2(PRIOR_STEP, 1, path, key_lo, key_hi)
        v = sigma * nv
        Z = v
        Za = 0.0
        B2 = 0.0
        B1 = 0.0
        for j in range(ns):
            th = q0[j] if kind[j] == HOLD else 0.0
            theta[j] = th
            Y[j] = th
            xi[j] = alpha[0] * th
            Ya[j] = 0.0
            QV[j] = 0.0
            th_buf[j, 0] = th
            xi_buf[j, 0] = xi[j]
        r = 0
        b = 0
        if nr > 0 and rec_node[0] == 0:
            zr[0, 0] = Z
            zr[0, 1] = B2
            zr[0, 2] = B1
            for j in range(ns):
                yr[0, j] = Y[j]
            r = 1
        status = OK
        bad = -1
        for k in range(m):
            if reset[k]:
                Za = Z
                for j in range(ns):
                    Ya[j] = Y[j]
            n1, n2 = normals2(k, 0, path, key_lo, key_hi)
            n3 = 0.0
            if need_w:
                n3, _ = normals2(k, 2, path, key_lo, key_hi)
            dB2 = sdt[k] * n1
            dZ = sdz[k] * n2
            a = alpha[k]
            X = Z
            if chase_mode == 1:
                X = 0.0
                sd = chase_sd[k]
                row = chase_int[k]
                for g in range(gx.shape[0]):
                    X += gw[g] * interp(Z + sd * gx[g], chase_z, chase_tab[row])
            for j in range(ns):
                kj = kind[j]
                d = 0.0
                if kj == EQUILIBRIUM:
                    if not reset[k]:
                        if den[k] <= 0.0:
                            status = SINGULAR
                            bad = k
                            break
                        d = a * (Z - Za - a * (Y[j] - Ya[j])) / den[k] * dt[k]
                elif kj == TARGET:
                    d = (X - xi[j]) / (a * tc_T[k]) * dt[k]
                if jump_step[j] == k:
                    d += jump_size[j]
                if kappa[j] != 0.0:
                    d += kappa[j] * sdt[k] * n3
                theta[j] += d
                Y[j] += d + dB2
                xi[j] += a * (d + dB2)
                QV[j] += d * d
                th_buf[j, k + 1] = theta[j]
                xi_buf[j, k + 1] = xi[j]
            if status != OK:
                break
            Z += dZ
            B2 += dB2
            B1 += sdt[k] * n2
            if b < nb_ and brk_node[b] == k + 1:
                for j in range(ns):
                    out_gap[ip, b, j] = xi[j] - Z
                b += 1
            if r < nr and rec_node[r] == k + 1:
                zr[r, 0] = Z
                zr[r, 1] = B2
                zr[r, 2] = B1
                for j in range(ns):
                    yr[r, j] = Y[j]
                r += 1
        out_v[ip] = v
        if status != OK:
            out_status[ip] = status
            out_node[ip] = bad
            continue
        fz = _f(fcode, fpar, ftx, ftf, Z)
        for j in range(ns):
            _price_row(pcode, ppar, ptx, ptf, gx, gw, xi_buf[j], rho, p_buf)
            W = 0.0
            for k in range(m):
                W += th_buf[j, k] * (p_buf[k + 1] - p_buf[k])
            W += (fz - p_buf[m]) * th_buf[j, m]
            out_wealth[ip, j] = W
            out_qv[ip, j] = QV[j]
            if status == OK and not (math.isfinite(W) and math.isfinite(th_buf[j, m])):
                status = NONFINITE
                bad = m
            for q in range(nr):
                n = rec_node[q]
                out_rec[ip, q, 0, j] = th_buf[j, n]
                out_rec[ip, q, 1, j] = yr[q, j]
                out_rec[ip, q, 2, j] = xi_buf[j, n]
                out_rec[ip, q, 3, j] = p_buf[n]
        for q in range(nr):
            out_recz[ip, q, 0] = zr[q, 0]
            out_recz[ip, q, 1] = zr[q, 1]
            out_recz[ip, q, 2] = zr[q, 2]
        out_status[ip] = status
        out_node[ip] = bad
    return 0


@nb.njit(nogil=True, cache=True)
def bridge_kernel(p0, npaths, key_lo, key_hi, sigma,
                  sdt, sdz, ratio, c21, c22, e21, e22, rho, rec_node,
                  pcode, ppar, ptx, ptf, fcode, fpar, ftx, ftf, gx, gw,
                  out_wealth, out_qv, out_rec, out_recz, out_v, out_gap):
    """Y = Z + U with U_{k+1} = ratio_k U_k + J2_k - J1_k and U_0 = -v."""
    m = sdt.shape[0]
    nr = rec_node.shape[0]
    for ip in range(npaths):
        path = p0 + ip
        nv, _ = normals2(PRIOR_STEP, 1, path, key_lo, key_hi)
        v = sigma * nv
        Z = v
        U = -v
        B2 = 0.0
        B1 = 0.0
        Y = 0.0
        theta = 0.0
        P = price_of(pcode, ppar, ptx, ptf, gx, gw, Y, rho[0])
        W = 0.0
        QV = 0.0
        r = 0
        if nr > 0 and rec_node[0] == 0:
            out_rec[ip, 0, 0] = theta
            out_rec[ip, 0, 1] = Y
            out_rec[ip, 0, 2] = Y
            out_rec[ip, 0, 3] = P
            out_recz[ip, 0, 0] = Z
            out_recz[ip, 0, 1] = B2
            out_recz[ip, 0, 2] = B1
            r = 1
        for k in range(m):
            n1, n2, n3, n4 = normals4(k, 0, path, key_lo, key_hi)
            dB2 = sdt[k] * n1
            dZ = sdz[k] * n2
            J2 = c21[k] * n1 + c22[k] * n3
            J1 = e21[k] * n2 + e22[k] * n4
            U = ratio[k] * U + J2 - J1
            Z += dZ
            B2 += dB2
            B1 += sdt[k] * n2
            if k == m - 1:
                U = 0.0  # imposed terminal limit
            Yn = Z + U
            th = Yn - B2
            d = th - theta
            QV += d * d
            Pn = price_of(pcode, ppar, ptx, ptf, gx, gw, Yn, rho[k + 1])
            W += theta * (Pn - P)
            P = Pn
            theta = th
            Y = Yn
            if r < nr and rec_node[r] == k + 1:
                out_rec[ip, r, 0] = theta
                out_rec[ip, r, 1] = Y
                out_rec[ip, r, 2] = Y
                out_rec[ip, r, 3] = P
                out_recz[ip, r, 0] = Z
                out_recz[ip, r, 1] = B2
                out_recz[ip, r, 2] = B1
                r += 1
        fz = _f(fcode, fpar, ftx, ftf, Z)
        W += (fz - P) * theta
        out_wealth[ip] = W
        out_qv[ip] = QV
        out_v[ip] = v
        out_gap[ip] = Y - Z
    return 0
