"""Adaptive Dormand-Prince 5(4) integrator for the radial equation.

State layout (always four slots, ``mode`` decides how many are active):

* mode 0 -- ``[u, u']``
* mode 1 -- ``[u, u', w, w']`` with ``w = u_partner - u`` integrated directly
  through the difference ``f(u+w) - f(u)``; the gap between two profiles is
  then resolved in relative terms even when it is far below ``rtol * u``.
* mode 2 -- ``[u, u', phi, phi']`` with phi solving the linearisation.

Nodes are returned raw; dense output is quintic Hermite built from
:func:`jet` (value, first and second derivative of every component).
"""

import math

import numpy as np

from ._families import difference, evaluate
from ._jit import maybe_njit

STATUS_RMAX = 0
STATUS_ZERO = 1
STATUS_CROSS = 2
STATUS_UNDERFLOW = -1
STATUS_MAXSTEPS = -2

_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = 9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)


@maybe_njit
def rhs(kind, params, mode, nm1, r, y, out):
    u = y[0]
    du = y[1]
    f, f1, _ = evaluate(kind, params, u)
    out[0] = du
    out[1] = -nm1 / r * du - f
    if mode == 1:
        df, _ = difference(kind, params, u, y[2])
        out[2] = y[3]
        out[3] = -nm1 / r * y[3] - df
    elif mode == 2:
        out[2] = y[3]
        out[3] = -nm1 / r * y[3] - f1 * y[2]


@maybe_njit
def jet(kind, params, mode, nm1, r, y, d1, d2):
    """First and second r-derivatives of every state component at r > 0."""
    u = y[0]
    du = y[1]
    f, f1, f2 = evaluate(kind, params, u)
    ddu = -nm1 / r * du - f
    d1[0] = du
    d1[1] = ddu
    d2[0] = ddu
    d2[1] = nm1 / (r * r) * du - nm1 / r * ddu - f1 * du
    if mode == 1:
        w = y[2]
        dw = y[3]
        df, df1 = difference(kind, params, u, w)
        ddw = -nm1 / r * dw - df
        d1[2] = dw
        d1[3] = ddw
        d2[2] = ddw
        d2[3] = nm1 / (r * r) * dw - nm1 / r * ddw - (f1 * dw + df1 * (du + dw))
    elif mode == 2:
        p = y[2]
        dp = y[3]
        ddp = -nm1 / r * dp - f1 * p
        d1[2] = dp
        d1[3] = ddp
        d2[2] = ddp
        d2[3] = nm1 / (r * r) * dp - nm1 / r * ddp - f2 * du * p - f1 * dp
    else:
        d1[2] = 0.0
        d1[3] = 0.0
        d2[2] = 0.0
        d2[3] = 0.0


@maybe_njit
def jet_many(kind, params, mode, nm1, rs, ys):
    n = rs.shape[0]
    d1 = np.zeros((n, 4))
    d2 = np.zeros((n, 4))
    a = np.empty(4)
    b = np.empty(4)
    for i in range(n):
        if rs[i] > 0.0:
            jet(kind, params, mode, nm1, rs[i], ys[i], a, b)
            for j in range(4):
                d1[i, j] = a[j]
                d2[i, j] = b[j]
    return d1, d2


@maybe_njit
def hermite5(t, h, y0, d0, s0, y1, d1, s1):
    """Quintic Hermite value and r-derivative at fraction t of a step of size h."""
    t2 = t * t
    t3 = t2 * t
    t4 = t3 * t
    t5 = t4 * t
    h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5
    h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5
    h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5)
    h3 = 0.5 * (t3 - 2.0 * t4 + t5)
    h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5
    h5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5
    val = y0 * h0 + h * d0 * h1 + h * h * s0 * h2 + h * h * s1 * h3 + h * d1 * h4 + y1 * h5
    g0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4
    g1 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4
    g2 = 0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4)
    g3 = 0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4)
    g4 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4
    g5 = -g0
    der = (y0 * g0 + h * d0 * g1 + h * h * s0 * g2 + h * h * s1 * g3 + h * d1 * g4 + y1 * g5) / h
    return val, der


@maybe_njit
def _event_value(mode, y):
    if mode == 1:
        return min(y[0], y[0] + y[2])
    return y[0]


@maybe_njit
def _interp_state(t, h, ya, da, sa, yb, db, sb, nv, out):
    for j in range(0, nv, 2):
        # component j carries (y_j, y_j' = y_{j+1}); interpolate both from the jet
        v, _ = hermite5(t, h, ya[j], da[j], sa[j], yb[j], db[j], sb[j])
        dv, _ = hermite5(t, h, ya[j + 1], da[j + 1], sa[j + 1], yb[j + 1], db[j + 1], sb[j + 1])
        out[j] = v
        out[j + 1] = dv


@maybe_njit
def _dp_step(kind, params, mode, nm1, r, y, h, nv, atol, rtol, k1, k2, k3, k4, k5, k6, k7, yt, ynew):
    """One Dormand-Prince step from (r, y) with k1 = y'(r).

    Fills ``ynew`` and ``k7 = y'(r + h)``; returns the scaled RMS error
    estimate, or -1 when anything non-finite appeared.
    """
    for j in range(nv):
        yt[j] = y[j] + h * _A21 * k1[j]
    rhs(kind, params, mode, nm1, r + _C2 * h, yt, k2)
    for j in range(nv):
        yt[j] = y[j] + h * (_A31 * k1[j] + _A32 * k2[j])
    rhs(kind, params, mode, nm1, r + _C3 * h, yt, k3)
    for j in range(nv):
        yt[j] = y[j] + h * (_A41 * k1[j] + _A42 * k2[j] + _A43 * k3[j])
    rhs(kind, params, mode, nm1, r + _C4 * h, yt, k4)
    for j in range(nv):
        yt[j] = y[j] + h * (_A51 * k1[j] + _A52 * k2[j] + _A53 * k3[j] + _A54 * k4[j])
    rhs(kind, params, mode, nm1, r + _C5 * h, yt, k5)
    for j in range(nv):
        yt[j] = y[j] + h * (_A61 * k1[j] + _A62 * k2[j] + _A63 * k3[j] + _A64 * k4[j] + _A65 * k5[j])
    rhs(kind, params, mode, nm1, r + h, yt, k6)
    for j in range(nv):
        ynew[j] = y[j] + h * (_B1 * k1[j] + _B3 * k3[j] + _B4 * k4[j] + _B5 * k5[j] + _B6 * k6[j])
    rhs(kind, params, mode, nm1, r + h, ynew, k7)
    err = 0.0
    for j in range(nv):
        e = h * (_E1 * k1[j] + _E3 * k3[j] + _E4 * k4[j] + _E5 * k5[j] + _E6 * k6[j] + _E7 * k7[j])
        q = e / (atol[j] + rtol * max(abs(y[j]), abs(ynew[j])))
        if not (math.isfinite(q) and math.isfinite(ynew[j]) and math.isfinite(k7[j])):
            return -1.0
        err += q * q
    return math.sqrt(err / nv)


@maybe_njit
def integrate(kind, params, mode, N, r0, y0, r_max, rtol, atol, stop_zero, stop_cross, max_steps):
    """Integrate from (r0, y0) to r_max.

    Returns ``(rs, ys, status)`` where ``rs[0] == r0``.  ``stop_zero``
    ends the run at the first zero of u (and of ``u + w`` in mode 1), refined
    by bisection on the Hermite interpolant.  ``stop_cross`` (mode 1) ends
    the run once w has changed sign and the integration has advanced to
    twice the crossing radius, leaving room to verify the crossing.
    """
    nv = 2 if mode == 0 else 4
    nm1 = N - 1.0
    cap = 4096
    rs = np.empty(cap)
    ys = np.empty((cap, 4))
    n = 0
    y = np.zeros(4)
    for j in range(4):
        y[j] = y0[j]
    r = r0
    rs[0] = r
    for j in range(4):
        ys[0, j] = y[j]
    n = 1

    k1 = np.empty(4)
    k2 = np.empty(4)
    k3 = np.empty(4)
    k4 = np.empty(4)
    k5 = np.empty(4)
    k6 = np.empty(4)
    k7 = np.empty(4)
    yt = np.empty(4)
    ynew = np.empty(4)
    da = np.empty(4)
    sa = np.empty(4)
    db = np.empty(4)
    sb = np.empty(4)
    ym = np.empty(4)

    rhs(kind, params, mode, nm1, r, y, k1)
    h = 0.5 * r0
    if h <= 0.0:
        h = 1e-8
    w_sign0 = 1.0 if y[2] >= 0.0 else -1.0
    r_cross = -1.0
    status = STATUS_RMAX
    rejected = False
    steps = 0

    while r < r_max:
        if steps >= max_steps:
            status = STATUS_MAXSTEPS
            break
        steps += 1
        if r + h > r_max:
            h = r_max - r
        if h < 1e-14 * r:
            status = STATUS_UNDERFLOW
            break

        err = _dp_step(kind, params, mode, nm1, r, y, h, nv, atol, rtol, k1, k2, k3, k4, k5, k6, k7, yt, ynew)
        finite = err >= 0.0
        if not finite:
            h *= 0.2
            rejected = True
            continue
        if err > 1.0:
            h *= max(0.2, 0.9 * err ** -0.2)
            rejected = True
            continue

        r_new = r + h
        hit_zero = stop_zero and _event_value(mode, ynew) <= 0.0
        if hit_zero:
            jet(kind, params, mode, nm1, r, y, da, sa)
            jet(kind, params, mode, nm1, r_new, ynew, db, sb)
            lo = 0.0
            hi = 1.0
            while (hi - lo) * h > max(1e-12, 4e-16 * r_new):
                mid = 0.5 * (lo + hi)
                _interp_state(mid, h, y, da, sa, ynew, db, sb, nv, ym)
                if _event_value(mode, ym) > 0.0:
                    lo = mid
                else:
                    hi = mid
                if hi - lo < 1e-17:
                    break
            # a genuine step to the located radius keeps the last node on a
            # solution trajectory (an interpolated state spoils u'' there)
            h = hi * h
            _dp_step(kind, params, mode, nm1, r, y, h, nv, atol, rtol, k1, k2, k3, k4, k5, k6, k7, yt, ynew)
            r_new = r + h

        if n >= cap:
            cap *= 2
            rs2 = np.empty(cap)
            ys2 = np.empty((cap, 4))
            rs2[:n] = rs[:n]
            ys2[:n] = ys[:n]
            rs = rs2
            ys = ys2
        rs[n] = r_new
        for j in range(4):
            ys[n, j] = ynew[j] if j < nv else 0.0
        n += 1
        r = r_new
        for j in range(nv):
            y[j] = ynew[j]
            k1[j] = k7[j]
        if hit_zero:
            status = STATUS_ZERO
            break

        if stop_cross and mode == 1:
            s = 1.0 if y[2] >= 0.0 else -1.0
            if r_cross < 0.0 and s != w_sign0:
                r_cross = r
            elif r_cross > 0.0 and (s == w_sign0 or r >= 2.0 * r_cross):
                status = STATUS_CROSS
                break

        fac = 10.0 if err == 0.0 else min(10.0, max(0.2, 0.9 * err ** -0.2))
        if rejected:
            fac = min(fac, 1.0)
            rejected = False
        h *= fac

    return rs[:n].copy(), ys[:n].copy(), status


@maybe_njit
def dense_eval(rs, ys, d1, d2, comp, x):
    """Hermite values of component pair (comp, comp+1) at sorted or unsorted x.

    Returns ``(value, derivative_of_value, value_of_next, derivative_of_next)``;
    the derivative of the second component is what residual checks need.
    """
    n = rs.shape[0]
    m = x.shape[0]
    v = np.empty(m)
    dv = np.empty(m)
    w = np.empty(m)
    dw = np.empty(m)
    for i in range(m):
        xi = x[i]
        k = np.searchsorted(rs, xi, side="right") - 1
        if k < 0:
            k = 0
        if k > n - 2:
            k = n - 2
        h = rs[k + 1] - rs[k]
        t = (xi - rs[k]) / h
        a, b = hermite5(t, h, ys[k, comp], d1[k, comp], d2[k, comp], ys[k + 1, comp], d1[k + 1, comp], d2[k + 1, comp])
        c, d = hermite5(
            t, h, ys[k, comp + 1], d1[k, comp + 1], d2[k, comp + 1], ys[k + 1, comp + 1], d1[k + 1, comp + 1], d2[k + 1, comp + 1]
        )
        v[i] = a
        dv[i] = b
        w[i] = c
        dw[i] = d
    return v, dv, w, dw


KERNEL_NAMES = ("rhs", "_dp_step", "jet", "jet_many", "hermite5", "_event_value", "_interp_state", "integrate", "dense_eval")
