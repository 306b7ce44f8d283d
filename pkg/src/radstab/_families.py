"""Scalar evaluators for the built-in nonlinearities.

Each family provides ``eval(params, u) -> (f, f', f'')`` and
``diff(params, u, w) -> (f(u+w) - f(u), f'(u+w) - f'(u))``.  The difference
form avoids cancellation when ``|w| << u``; it is what lets the pair
integrator resolve the gap between two nearly equal profiles.

All families are extended to ``u < 0`` as odd functions so that Runge-Kutta
stages which overshoot a zero stay finite.
"""

import math

import numpy as np

from ._jit import maybe_njit


@maybe_njit
def power_eval(params, u):
    p = params[0]
    a = abs(u)
    s = 1.0 if u >= 0.0 else -1.0
    if a == 0.0:
        return 0.0, 0.0, 0.0
    la = math.log(a)
    f = s * math.exp(p * la)
    f1 = p * math.exp((p - 1.0) * la)
    f2 = s * p * (p - 1.0) * math.exp((p - 2.0) * la)
    return f, f1, f2


@maybe_njit
def power_diff(params, u, w):
    p = params[0]
    v = u + w
    if u > 0.0 and v > 0.0:
        x = math.log1p(w / u)
        lu = math.log(u)
        return (
            math.exp(p * lu) * math.expm1(p * x),
            p * math.exp((p - 1.0) * lu) * math.expm1((p - 1.0) * x),
        )
    fu, f1u, _ = power_eval(params, u)
    fv, f1v, _ = power_eval(params, v)
    return fv - fu, f1v - f1u


@maybe_njit
def power_sum_eval(params, u):
    p1 = params[0]
    p2 = params[1]
    a = abs(u)
    s = 1.0 if u >= 0.0 else -1.0
    if a == 0.0:
        return 0.0, 0.0, 0.0
    la = math.log(a)
    f = s * (math.exp(p1 * la) + math.exp(p2 * la))
    f1 = p1 * math.exp((p1 - 1.0) * la) + p2 * math.exp((p2 - 1.0) * la)
    f2 = s * (p1 * (p1 - 1.0) * math.exp((p1 - 2.0) * la) + p2 * (p2 - 1.0) * math.exp((p2 - 2.0) * la))
    return f, f1, f2


@maybe_njit
def power_sum_diff(params, u, w):
    p1 = params[0]
    p2 = params[1]
    v = u + w
    if u > 0.0 and v > 0.0:
        x = math.log1p(w / u)
        lu = math.log(u)
        df = math.exp(p1 * lu) * math.expm1(p1 * x) + math.exp(p2 * lu) * math.expm1(p2 * x)
        df1 = p1 * math.exp((p1 - 1.0) * lu) * math.expm1((p1 - 1.0) * x) + p2 * math.exp(
            (p2 - 1.0) * lu
        ) * math.expm1((p2 - 1.0) * x)
        return df, df1
    fu, f1u, _ = power_sum_eval(params, u)
    fv, f1v, _ = power_sum_eval(params, v)
    return fv - fu, f1v - f1u


@maybe_njit
def power_rational_eval(params, u):
    # u^p1 / (1+u)^p2
    p1 = params[0]
    p2 = params[1]
    a = abs(u)
    s = 1.0 if u >= 0.0 else -1.0
    if a == 0.0:
        return 0.0, 0.0, 0.0
    la = math.log(a)
    l1 = math.log1p(a)
    d = p1 - p2
    f = s * math.exp(p1 * la - p2 * l1)
    f1 = (p1 + d * a) * math.exp((p1 - 1.0) * la - (p2 + 1.0) * l1)
    poly = d * (d - 1.0) * a * a + 2.0 * p1 * (d - 1.0) * a + p1 * (p1 - 1.0)
    f2 = s * poly * math.exp((p1 - 2.0) * la - (p2 + 2.0) * l1)
    return f, f1, f2


@maybe_njit
def power_rational_diff(params, u, w):
    p1 = params[0]
    p2 = params[1]
    v = u + w
    if u > 0.0 and v > 0.0:
        d = p1 - p2
        x = math.log1p(w / u)
        y = math.log1p(w / (1.0 + u))
        lu = math.log(u)
        l1 = math.log1p(u)
        fu = math.exp(p1 * lu - p2 * l1)
        c = p1 + d * u
        f1u = c * math.exp((p1 - 1.0) * lu - (p2 + 1.0) * l1)
        df = fu * math.expm1(p1 * x - p2 * y)
        df1 = f1u * math.expm1((p1 - 1.0) * x - (p2 + 1.0) * y + math.log1p(d * w / c))
        return df, df1
    fu, f1u, _ = power_rational_eval(params, u)
    fv, f1v, _ = power_rational_eval(params, v)
    return fv - fu, f1v - f1u


@maybe_njit
def exponential_eval(params, u):
    e = math.exp(u)
    return e, e, e


@maybe_njit
def exponential_diff(params, u, w):
    d = math.exp(u) * math.expm1(w)
    return d, d


POWER, POWER_SUM, POWER_RATIONAL, EXPONENTIAL = 0, 1, 2, 3


@maybe_njit
def evaluate(kind, params, u):
    """(f, f', f'') for the family with integer code ``kind``."""
    if kind == POWER:
        return power_eval(params, u)
    if kind == POWER_SUM:
        return power_sum_eval(params, u)
    if kind == POWER_RATIONAL:
        return power_rational_eval(params, u)
    return exponential_eval(params, u)


@maybe_njit
def difference(kind, params, u, w):
    if kind == POWER:
        return power_diff(params, u, w)
    if kind == POWER_SUM:
        return power_sum_diff(params, u, w)
    if kind == POWER_RATIONAL:
        return power_rational_diff(params, u, w)
    return exponential_diff(params, u, w)


@maybe_njit
def eval_many(kind, params, u):
    n = u.shape[0]
    f = np.empty(n)
    f1 = np.empty(n)
    f2 = np.empty(n)
    for i in range(n):
        a, b, c = evaluate(kind, params, u[i])
        f[i] = a
        f1[i] = b
        f2[i] = c
    return f, f1, f2
