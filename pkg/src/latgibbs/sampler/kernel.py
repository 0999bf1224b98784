"""Compiled single-site heat-bath draws for polynomial models.

The potential seen by site k is
    V(x) = F(x) + lam * sum_m P_m(x - y_m),
with y_m the value at the m-th neighbor and P_m the pair polynomial for the
displacement from that neighbor back to k. Each draw is an inverse-CDF draw from
exp(-V) with the same certified-truncation and Gauss-Legendre table as
``numerics.density``, specialized for speed.
"""
from __future__ import annotations

import math

import numba
import numpy as np

from ..numerics.rng import keyed_uniform

TAIL_TOL = 1e-12
CDF_RTOL = 1e-10
MAX_PANELS = 8192
_GX, _GW = np.polynomial.legendre.leggauss(8)


@numba.njit(cache=True)
def _horner(c, x):
    acc = 0.0
    for i in range(c.shape[0] - 1, -1, -1):
        acc = acc * x + c[i]
    return acc


@numba.njit(cache=True)
def _V(x, fc, pc, ys, act, lam):
    v = _horner(fc, x)
    if lam != 0.0:
        s = 0.0
        for m in range(ys.shape[0]):
            if act[m]:
                s += _horner(pc[m], x - ys[m])
        v += lam * s
    return v


@numba.njit(cache=True)
def _mass_lower_bound(m, top, s0, fc, pc, ys, act, lam):
    total = 0.0
    for side in (-1.0, 1.0):
        best = 0.0
        s = s0
        for _ in range(6):
            drop = _V(m + side * s, fc, pc, ys, act, lam) - top
            if drop < 0.0:
                drop = 0.0
            piece = s if drop < 1e-12 else s * (-math.expm1(-drop)) / drop
            if piece > best:
                best = piece
            s *= 0.5
        total += best
    return total


@numba.njit(cache=True)
def _tail(p, side, top, fc, f1, pc, p1, ys, act, lam):
    slope = side * _V(p, f1, p1, ys, act, lam)
    if slope <= 0.0:
        return np.inf
    return math.exp(-(_V(p, fc, pc, ys, act, lam) - top)) / slope


@numba.njit(cache=True)
def _panel_mass(a, b, top, fc, pc, ys, act, lam, gx, gw):
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    acc = 0.0
    for q in range(gx.shape[0]):
        acc += gw[q] * math.exp(top - _V(mid + half * gx[q], fc, pc, ys, act, lam))
    return acc * half


@numba.njit(cache=True)
def draw_conditional(u, ys, act, fc, f1, f2, pc, p1, p2, lam, eps, gx, gw, masses):
    """Quantile u of exp(-V); ys/act hold neighbor values and presence flags.

    ``masses`` is scratch space of length MAX_PANELS.
    """
    # mode: root of V' inside the strong-convexity bracket around 0
    g = _V(0.0, f1, p1, ys, act, lam)
    if g == 0.0:
        m = 0.0
    else:
        width = abs(g) / eps
        if g > 0:
            lo, hi = -width, 0.0
        else:
            lo, hi = 0.0, width
        pad = 1e-12 * (1.0 + abs(lo) + abs(hi))
        lo -= pad
        hi += pad
        m = 0.5 * (lo + hi)
        for _ in range(200):
            d1 = _V(m, f1, p1, ys, act, lam)
            if d1 > 0:
                hi = m
            elif d1 < 0:
                lo = m
            else:
                break
            d2 = _V(m, f2, p2, ys, act, lam)
            xn = m - d1 / d2
            if not (lo < xn < hi):
                xn = 0.5 * (lo + hi)
            if abs(xn - m) <= 1e-15 * (1.0 + abs(m)) or hi - lo <= 1e-15 * (1.0 + abs(m)):
                m = xn
                break
            m = xn
    top = _V(m, fc, pc, ys, act, lam)
    s0 = 1.0 / math.sqrt(_V(m, f2, p2, ys, act, lam))
    zlow = _mass_lower_bound(m, top, s0, fc, pc, ys, act, lam)
    budget = 0.25 * TAIL_TOL * zlow

    ends = np.empty(2)
    for e in range(2):
        side = -1.0 if e == 0 else 1.0
        near = m
        far = m + side * s0
        while _tail(far, side, top, fc, f1, pc, p1, ys, act, lam) > budget:
            near = far
            far = m + 2.0 * (far - m)
        # the endpoint only needs to be certified, not tight
        for _ in range(12):
            mid = 0.5 * (near + far)
            if _tail(mid, side, top, fc, f1, pc, p1, ys, act, lam) <= budget:
                far = mid
            else:
                near = mid
        ends[e] = far
    a0 = ends[0]
    b0 = ends[1]

    # first level: panels about two local standard deviations wide
    n = 4
    while n < MAX_PANELS // 4 and (b0 - a0) / n > 2.0 * s0:
        n *= 2
    prev = -1.0
    z = 0.0
    converged = False
    while n <= MAX_PANELS:
        h = (b0 - a0) / n
        z = 0.0
        for i in range(n):
            pm = _panel_mass(a0 + i * h, a0 + (i + 1) * h, top, fc, pc, ys, act, lam, gx, gw)
            masses[i] = pm
            z += pm
        if prev > 0 and abs(z - prev) <= CDF_RTOL * z:
            converged = True
            break
        prev = z
        n *= 2
    if not converged:
        return np.nan

    h = (b0 - a0) / n
    target = u * z
    cum = 0.0
    i = 0
    while i < n - 1 and cum + masses[i] < target:
        cum += masses[i]
        i += 1
    a = a0 + i * h
    b = a + h
    rem = target - cum
    frac = rem / masses[i] if masses[i] > 0 else 0.5
    frac = min(max(frac, 0.0), 1.0)
    x = a + h * frac
    lo = a
    hi = b
    for _ in range(60):
        resid = _panel_mass(a, x, top, fc, pc, ys, act, lam, gx, gw) - rem
        if abs(resid) <= 1e-14 * z:
            break
        if resid < 0:
            lo = x
        else:
            hi = x
        dens = math.exp(top - _V(x, fc, pc, ys, act, lam))
        xn = x - resid / dens if dens > 0 else 0.5 * (lo + hi)
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        x = xn
    return x


@numba.njit(cache=True)
def update_site(ext, k, u, nb, fc, f1, f2, pc, p1, p2, lam, eps, gx, gw, work):
    M = nb.shape[1]
    ys = np.empty(M)
    act = np.zeros(M, dtype=np.bool_)
    for q in range(M):
        t = nb[k, q]
        if t >= 0:
            ys[q] = ext[t]
            act[q] = True
        else:
            ys[q] = 0.0
    return draw_conditional(u, ys, act, fc, f1, f2, pc, p1, p2, lam, eps, gx, gw, work)


@numba.njit(cache=True)
def run_sweeps(ext, order, class_bounds, buffered, seed, sweep0, nsweeps, burnin, thin,
               records, rec_sweeps, nb, fc, f1, f2, pc, p1, p2, lam, eps, gx, gw):
    """Advance ``nsweeps`` sweeps in place; returns (records written, status).

    Status 0 is success; 1 means a draw failed to converge (field left at the
    sweep where it happened).
    """
    nrec = 0
    n_sites = order.shape[0]
    tmp = np.empty(n_sites)
    work = np.empty(MAX_PANELS)
    for s in range(nsweeps):
        sweep = sweep0 + s
        for c in range(class_bounds.shape[0] - 1):
            start = class_bounds[c]
            stop = class_bounds[c + 1]
            for q in range(start, stop):
                k = order[q]
                u = keyed_uniform(seed, k, sweep, 0)
                v = update_site(ext, k, u, nb, fc, f1, f2, pc, p1, p2, lam, eps, gx, gw, work)
                if not np.isfinite(v):
                    return nrec, 1
                if buffered:
                    tmp[q] = v
                else:
                    ext[k] = v
            if buffered:
                for q in range(start, stop):
                    ext[order[q]] = tmp[q]
        done = sweep + 1
        if done > burnin and (done - burnin) % thin == 0:
            for i in range(records.shape[1]):
                records[nrec, i] = ext[i]
            rec_sweeps[nrec] = done
            nrec += 1
    return nrec, 0
