"""Nonlinearities f and the scalar functionals built from them.

The central object is :class:`NonlinearitySpec`.  Besides f, f', f'' it
provides ``F(u) = int_u^inf ds / f(s)`` and its inverse, the quantity
``q(u) = f'(u) F(u)`` and the curvature ratio ``f'^2 / (f f'')``.

F is closed-form for pure powers.  For other families it is evaluated
exactly (not interpolated) from a table of Gauss-Legendre panel integrals in
the variable ``t = log s``: a query adds one sub-panel integral to the
tabulated value at the next node, so every call costs a single 20-point
rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _families as fam
from .errors import DomainError, HypothesisError, RangeError

_GL_ORDER = 20
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)

FAMILIES = ("power", "power_sum", "power_rational", "custom")

_KERNELS = {
    "power": (fam.POWER, fam.power_eval, fam.power_diff),
    "power_sum": (fam.POWER_SUM, fam.power_sum_eval, fam.power_sum_diff),
    "power_rational": (fam.POWER_RATIONAL, fam.power_rational_eval, fam.power_rational_diff),
    "exponential": (fam.EXPONENTIAL, fam.exponential_eval, fam.exponential_diff),
}


def _gl_integral(func, a, b):
    """Vectorised 20-point Gauss-Legendre integral of ``func`` over [a, b]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    t = mid[..., None] + half[..., None] * _GL_X
    return half * (func(t) @ _GL_W)


class _FTable:
    """Exact evaluator for F on [floor, cap] via log-variable panels."""

    def __init__(self, recip, fprime_ratio, floor, cap, dt=0.25):
        # recip(s) = 1/f(s); fprime_ratio(s) = s f'(s) / f(s)
        self.recip = recip
        self.slope = fprime_ratio
        self.t0 = math.log(floor)
        t1 = math.log(cap)
        n = max(1, int(math.ceil((t1 - self.t0) / dt)))
        self.dt = (t1 - self.t0) / n
        self.t = self.t0 + self.dt * np.arange(n + 1)
        panels = _gl_integral(self._integrand, self.t[:-1], self.t[1:])
        tail = self.tail(cap)
        acc = np.concatenate([np.cumsum(panels[::-1])[::-1], [0.0]])
        self.nodes = acc + tail
        if not np.all(np.isfinite(self.nodes)) or not np.all(panels > 0):
            raise HypothesisError("F could not be tabulated: 1/f is not positive and integrable")

    def _integrand(self, t):
        s = np.exp(t)
        return s * self.recip(s)

    def tail(self, s0, max_span=200.0):
        """int_{s0}^inf ds/f(s), panels in log s then a power-law remainder."""
        t = math.log(s0)
        total = 0.0
        t_end = t + max_span
        while t < t_end:
            edges = t + self.dt * np.arange(65)
            part = _gl_integral(self._integrand, edges[:-1], edges[1:])
            if not np.all(np.isfinite(part)):
                raise HypothesisError(f"1/f not finite beyond u={s0:g}")
            total += float(part.sum())
            t = float(edges[-1])
            if part[-1] <= 1e-17 * total:
                return total
        s = math.exp(t)
        m = float(self.slope(np.array([s]))[0])
        if not m > 1.0 + 1e-9:
            raise HypothesisError(
                f"1/f is not integrable at infinity (local exponent {m:.6g} <= 1 at u={s:.3g})"
            )
        return total + s * float(self.recip(np.array([s]))[0]) / (m - 1.0)

    def F(self, u):
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        lu = np.log(u)
        inside = lu <= self.t[-1]
        if np.any(inside):
            li = lu[inside]
            k = np.clip(np.floor((li - self.t0) / self.dt).astype(int), 0, len(self.t) - 2)
            b = self.t[k + 1]
            out[inside] = self.nodes[k + 1] + _gl_integral(self._integrand, li, b)
        for i in np.flatnonzero(~inside):
            out.flat[i] = self.tail(float(u.flat[i]))
        return out

    def invert(self, x, tol=1e-15, maxiter=60):
        x = np.asarray(x, dtype=float)
        if np.any(x > self.nodes[0]) or np.any(x < self.nodes[-1]):
            raise RangeError(
                f"F^-1 bracket not found: x outside [F(cap), F(floor)] = "
                f"[{self.nodes[-1]:.6g}, {self.nodes[0]:.6g}]"
            )
        k = np.searchsorted(-self.nodes, -x, side="left") - 1
        k = np.clip(k, 0, len(self.t) - 2)
        lo = self.t[k]
        hi = self.t[k + 1]
        lf0 = np.log(self.nodes[k])
        lf1 = np.log(self.nodes[k + 1])
        lx = np.log(x)
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(lf0 > lf1, (lf0 - lx) / (lf0 - lf1), 0.5)
        t = lo + np.clip(frac, 0.0, 1.0) * (hi - lo)
        for _ in range(maxiter):
            s = np.exp(t)
            Fv = self.F(s)
            g = np.log(Fv) - lx
            dg = -s * self.recip(s) / Fv
            step = g / dg
            t_new = np.clip(t - step, lo, hi)
            done = np.abs(g) <= tol
            t = np.where(done, t, t_new)
            if np.all(done) or np.all(np.abs(step) <= 1e-16 * np.maximum(1.0, np.abs(t))):
                break
        return np.exp(t)


@dataclass(frozen=True)
class NonlinearitySpec:
    """A nonlinearity satisfying the standing convexity hypotheses.

    Build instances with :func:`power`, :func:`power_sum`,
    :func:`power_rational`, :func:`custom` or :func:`from_config`.
    """

    family: str
    params: tuple = ()
    domain_floor: float = 1e-12
    u_cap: float = 1e12
    f_custom: Optional[Callable] = field(default=None, compare=False, repr=False)
    fp_custom: Optional[Callable] = field(default=None, compare=False, repr=False)
    fpp_custom: Optional[Callable] = field(default=None, compare=False, repr=False)
    F_custom: Optional[Callable] = field(default=None, compare=False, repr=False)
    Finv_custom: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown family {self.family!r}")
        if not (0.0 < self.domain_floor < self.u_cap):
            raise DomainError("need 0 < domain_floor < u_cap")
        kp = np.asarray(self.params, dtype=float)
        object.__setattr__(self, "kparams", kp)
        if self.family == "custom":
            if self.f_custom is None or self.fp_custom is None or self.fpp_custom is None:
                raise DomainError("custom family needs f, f' and f''")
            f, fp, fpp = self.f_custom, self.fp_custom, self.fpp_custom

            def fev(params, u):
                return f(u), fp(u), fpp(u)

            def fdiff(params, u, w):
                return f(u + w) - f(u), fp(u + w) - fp(u)

            object.__setattr__(self, "code", -1)
        else:
            kind, fev, fdiff = _KERNELS[self.family]
            object.__setattr__(self, "code", kind)
        object.__setattr__(self, "fev", fev)
        object.__setattr__(self, "fdiff", fdiff)
        object.__setattr__(self, "_table", None)
        object.__setattr__(self, "_table_error", None)
        if not self.has_closed_form_F:
            try:
                table = _FTable(self._recip, self._slope, self.domain_floor, self.u_cap)
                object.__setattr__(self, "_table", table)
            except HypothesisError as exc:
                object.__setattr__(self, "_table_error", exc)

    # -- construction helpers -------------------------------------------------

    @property
    def has_closed_form_F(self):
        return self.family == "power" or (self.family == "custom" and self.F_custom is not None)

    allows_negative = False

    def to_config(self):
        if self.family == "power":
            return {"family": "power", "p": self.params[0]}
        if self.family in ("power_sum", "power_rational"):
            return {"family": self.family, "p1": self.params[0], "p2": self.params[1]}
        return {"family": "custom"}

    def __str__(self):
        if self.family == "power":
            return f"u^{self.params[0]:g}"
        if self.family == "power_sum":
            return f"u^{self.params[0]:g} + u^{self.params[1]:g}"
        if self.family == "power_rational":
            return f"u^{self.params[0]:g} / (1+u)^{self.params[1]:g}"
        return "custom"

    # -- vectorised evaluation ------------------------------------------------

    def f_vec(self, u):
        """Arrays (f, f', f'') at the points ``u`` (no hypothesis checks)."""
        u = np.asarray(u, dtype=float)
        if self.family == "custom":
            shape = u.shape
            uu = u.ravel()
            out = []
            for g in (self.f_custom, self.fp_custom, self.fpp_custom):
                try:
                    val = np.asarray(g(uu), dtype=float)
                    if val.shape != uu.shape:
                        val = np.broadcast_to(val, uu.shape).astype(float)
                except Exception:
                    val = np.array([float(g(x)) for x in uu])
                out.append(val.reshape(shape))
            return tuple(out)
        flat = np.ascontiguousarray(u.ravel())
        f, f1, f2 = fam.eval_many(self.code, self.kparams, flat)
        return f.reshape(u.shape), f1.reshape(u.shape), f2.reshape(u.shape)

    def _recip(self, s):
        return 1.0 / self.f_vec(s)[0]

    def _slope(self, s):
        f, f1, _ = self.f_vec(s)
        return s * f1 / f

    # -- the operations ---------------------------------------------------------

    def eval_derivatives(self, u):
        """(f(u), f'(u), f''(u)) for a single ``u > 0``."""
        u = float(u)
        if not u > 0.0:
            raise DomainError(f"u must be positive, got {u!r}")
        vals = tuple(float(v) for v in self.fev(self.kparams, u))
        if not all(math.isfinite(v) for v in vals):
            raise HypothesisError(f"non-finite derivative at u={u:g}: {vals}")
        if not all(v > 0.0 for v in vals):
            raise HypothesisError(f"f, f', f'' must be positive; got {vals} at u={u:g}")
        return vals

    def _check_domain(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(~(u > 0.0)):
            raise DomainError("F is defined for u > 0 only")
        if not self.has_closed_form_F and np.any(u < self.domain_floor * (1.0 - 1e-12)):
            raise DomainError(f"u below domain_floor={self.domain_floor:g} refused")
        return u

    def F(self, u):
        """F(u) = int_u^inf ds/f(s).  Accepts scalars or arrays."""
        scalar = np.ndim(u) == 0
        u = self._check_domain(u)
        if self.family == "power":
            p = self.params[0]
            out = np.power(u, 1.0 - p) / (p - 1.0)
        elif self.family == "custom" and self.F_custom is not None:
            out = np.asarray(self.F_custom(u), dtype=float)
        else:
            if self._table_error is not None:
                raise self._table_error
            out = self._table.F(np.atleast_1d(u)).reshape(np.shape(u))
        return float(out) if scalar else out

    def invert_F(self, x):
        """The u > 0 with F(u) = x."""
        scalar = np.ndim(x) == 0
        x = np.asarray(x, dtype=float)
        if np.any(~(x > 0.0)):
            raise DomainError("F^-1 needs x > 0")
        if self.family == "power":
            p = self.params[0]
            out = np.power((p - 1.0) * x, -1.0 / (p - 1.0))
        elif self.family == "custom" and self.Finv_custom is not None:
            out = np.asarray(self.Finv_custom(x), dtype=float)
        elif self.family == "custom" and self.F_custom is not None:
            out = _bisect_decreasing(self.F, np.atleast_1d(x), self.domain_floor, self.u_cap)
            out = out.reshape(x.shape)
        else:
            if self._table_error is not None:
                raise self._table_error
            out = self._table.invert(np.atleast_1d(x)).reshape(x.shape)
        return float(out) if scalar else out

    def q_of(self, u):
        """f'(u) F(u)."""
        scalar = np.ndim(u) == 0
        u = self._check_domain(u)
        out = self.f_vec(u)[1] * self.F(u)
        return float(out) if scalar else out

    def curvature_ratio(self, u):
        """f'(u)^2 / (f(u) f''(u))."""
        scalar = np.ndim(u) == 0
        u = self._check_domain(u)
        f, f1, f2 = self.f_vec(u)
        out = f1 * f1 / (f * f2)
        return float(out) if scalar else out


def _bisect_decreasing(F, x, lo, hi, iters=200):
    a = np.full_like(x, math.log(lo))
    b = np.full_like(x, math.log(hi))
    if np.any(F(np.exp(a)) < x) or np.any(F(np.exp(b)) > x):
        raise RangeError("F^-1 bracket not found within [domain_floor, u_cap]")
    for _ in range(iters):
        m = 0.5 * (a + b)
        go_right = F(np.exp(m)) > x
        a = np.where(go_right, m, a)
        b = np.where(go_right, b, m)
        if np.all(b - a < 1e-15):
            break
    return np.exp(0.5 * (a + b))


# -- constructors -------------------------------------------------------------


def power(p, **kw):
    if not p > 1.0:
        raise DomainError(f"power family needs p > 1, got {p}")
    return NonlinearitySpec("power", (float(p),), **kw)


def power_sum(p1, p2, **kw):
    """u^p1 + u^p2 with p1 > p2 > 1."""
    if not (p1 > p2 > 1.0):
        raise DomainError(f"power_sum needs p1 > p2 > 1, got p1={p1}, p2={p2}")
    return NonlinearitySpec("power_sum", (float(p1), float(p2)), **kw)


def power_rational(p1, p2, **kw):
    """u^p1 / (1+u)^p2 with p1 > p2 + 1 (or p2 == 0)."""
    if not (p1 > p2 + 1.0 or (p2 == 0 and p1 > 1.0)) or p2 < 0:
        raise DomainError(f"power_rational needs p1 > p2 + 1 or p2 = 0, got p1={p1}, p2={p2}")
    return NonlinearitySpec("power_rational", (float(p1), float(p2)), **kw)


def custom(f, fp, fpp, F=None, Finv=None, **kw):
    return NonlinearitySpec("custom", (), f_custom=f, fp_custom=fp, fpp_custom=fpp, F_custom=F, Finv_custom=Finv, **kw)


def from_config(cfg):
    cfg = dict(cfg)
    family = cfg.pop("family")
    kw = {k: float(cfg.pop(k)) for k in ("domain_floor", "u_cap") if k in cfg}
    if family == "power":
        spec = power(cfg.pop("p"), **kw)
    elif family == "power_sum":
        spec = power_sum(cfg.pop("p1"), cfg.pop("p2"), **kw)
    elif family == "power_rational":
        spec = power_rational(cfg.pop("p1"), cfg.pop("p2"), **kw)
    else:
        raise DomainError(f"family {family!r} cannot be built from a config")
    if cfg:
        raise DomainError(f"unknown nonlinearity keys: {sorted(cfg)}")
    return spec


def power_sum_from_q(q1, q2):
    """u^p1 + u^p2 with p_i the Hoelder conjugates of q1 < q2."""
    return power_sum(q1 / (q1 - 1.0), q2 / (q2 - 1.0))


# -- functional wrappers ----------------------------------------------------------


def eval_derivatives(spec, u):
    return spec.eval_derivatives(u)


def eval_F(spec, u):
    return spec.F(u)


def invert_F(spec, x):
    return spec.invert_F(x)


def q_of(spec, u):
    return spec.q_of(u)


def curvature_ratio(spec, u):
    return spec.curvature_ratio(u)


# -- exponents and limits ---------------------------------------------------------


@dataclass(frozen=True)
class CriticalExponents:
    N: int
    p_S: float
    q_S: float
    p_JL: float  # math.inf when N <= 10
    q_JL: Optional[float]

    def to_dict(self):
        return {
            "N": self.N,
            "p_S": self.p_S,
            "q_S": self.q_S,
            "p_JL": self.p_JL if math.isfinite(self.p_JL) else None,
            "p_JL_finite": math.isfinite(self.p_JL),
            "q_JL": self.q_JL,
        }


def critical_exponents(N):
    if int(N) != N or N < 3:
        raise DomainError(f"N must be an integer >= 3, got {N}")
    N = int(N)
    p_S = (N + 2.0) / (N - 2.0)
    q_S = (N + 2.0) / 4.0
    if N >= 11:
        root = math.sqrt(N - 1.0)
        p_JL = 1.0 + 4.0 / (N - 4.0 - 2.0 * root)
        q_JL = (N - 2.0 * root) / 4.0
    else:
        p_JL, q_JL = math.inf, None
    return CriticalExponents(N, p_S, q_S, p_JL, q_JL)


def hardy_gate(q, N):
    """q (2N - 4q) - (N-2)^2 / 4; nonpositive exactly when q <= q_JL or q >= N/2 - q_JL."""
    return q * (2.0 * N - 4.0 * q) - (N - 2.0) ** 2 / 4.0


@dataclass(frozen=True)
class LimitEstimates:
    q0: Optional[float]
    q0_uncertainty: float
    q_inf: Optional[float]
    q_inf_uncertainty: float
    p0: Optional[float]
    p_inf: Optional[float]
    grid: tuple
    notes: tuple = ()

    def to_dict(self):
        return {
            "notes": list(self.notes),
            "q0": self.q0,
            "q0_uncertainty": self.q0_uncertainty,
            "q_inf": self.q_inf,
            "q_inf_uncertainty": self.q_inf_uncertainty,
            "p0": self.p0,
            "p_inf": self.p_inf,
        }


def _end_limit(values, k, rtol):
    tail = np.asarray(values[:k], dtype=float)
    if not np.all(np.isfinite(tail)):
        return None, math.inf
    spread = float(tail.max() - tail.min())
    scale = max(abs(float(tail[0])), 1e-300)
    if spread <= rtol * scale:
        return float(tail[0]), spread
    return None, spread


def estimate_limits(spec, k=4, rtol=1e-3):
    """Limits of f'F (and u f'/f) at 0 and infinity from decade-spaced samples.

    A limit is reported only when the ``k`` outermost samples agree to
    ``rtol``; the reported value is the outermost sample, never an
    extrapolation.
    """
    lo = math.ceil(math.log10(spec.domain_floor) - 1e-9)
    hi = math.floor(math.log10(spec.u_cap) + 1e-9)
    grid = 10.0 ** np.arange(lo, hi + 1, dtype=float)
    q = spec.q_of(grid)
    f, f1, _ = spec.f_vec(grid)
    p = grid * f1 / f
    q0, e0 = _end_limit(q, k, rtol)
    qi, ei = _end_limit(q[::-1], k, rtol)
    p0, _ = _end_limit(p, k, rtol)
    pi, _ = _end_limit(p[::-1], k, rtol)
    notes = []
    # a limit below 1 contradicts convexity of f; treat it as a sampling failure
    if q0 is not None and q0 < 1.0 - rtol:
        notes.append(f"q0 estimate {q0:.6g} < 1 rejected")
        q0 = None
    if qi is not None and qi < 1.0 - rtol:
        notes.append(f"q_inf estimate {qi:.6g} < 1 rejected")
        qi = None
    return LimitEstimates(q0, e0, qi, ei, p0, pi, tuple(grid.tolist()), tuple(notes))


@dataclass
class HypothesisReport:
    ok: bool
    violations: list
    tail_exponent: float
    samples: int

    def to_dict(self):
        return {"ok": self.ok, "violations": self.violations, "tail_exponent": self.tail_exponent, "samples": self.samples}


def check_hypotheses(spec, n=241):
    """Sample positivity, monotonicity, convexity and tail integrability of 1/f."""
    u = np.logspace(math.log10(spec.domain_floor), math.log10(spec.u_cap), n)
    f, f1, f2 = spec.f_vec(u)
    bad = []
    for name, arr in (("f", f), ("f'", f1), ("f''", f2)):
        idx = np.flatnonzero(~(arr > 0.0) | ~np.isfinite(arr))
        if idx.size:
            bad.append(f"{name} <= 0 or non-finite at u={u[idx[0]]:.3g}")
    if np.any(np.diff(f) <= 0.0):
        bad.append("f not increasing on the sample grid")
    if np.any(np.diff(f1) <= 0.0):
        bad.append("f' not increasing on the sample grid")
    tail = float(np.log(f[-1] / f[-2]) / np.log(u[-1] / u[-2]))
    if not tail > 1.0 + 1e-6:
        bad.append(f"1/f not integrable at infinity: log-log slope {tail:.6g} <= 1")
    return HypothesisReport(not bad, bad, tail, n)


__all__ = [
    "NonlinearitySpec",
    "CriticalExponents",
    "LimitEstimates",
    "HypothesisReport",
    "power",
    "power_sum",
    "power_rational",
    "custom",
    "from_config",
    "power_sum_from_q",
    "eval_derivatives",
    "eval_F",
    "invert_F",
    "q_of",
    "curvature_ratio",
    "critical_exponents",
    "hardy_gate",
    "estimate_limits",
    "check_hypotheses",
]
