"""Radial shooting: u'' + (N-1)/r u' + f(u) = 0, u(0) = alpha, u'(0) = 0.

The coordinate singularity at r = 0 is stepped over with the Taylor series
``u = alpha - f(alpha) r^2 / (2N) + f'(alpha) f(alpha) r^4 / (8N(N+2))``;
from there an adaptive Dormand-Prince 5(4) kernel takes over.  Every
profile carries quintic Hermite dense output built from the exact first and
second derivatives at each node, so evaluation between nodes keeps the
integrator's order and the ODE residual can be checked anywhere.

Three solves share the kernel:

* :func:`solve_ivp` -- a single profile;
* :func:`solve_pair` -- a profile together with the gap ``w`` to a second
  solution, integrated as its own unknown so that tiny gaps stay accurate;
* :func:`solve_linearized` -- a profile together with ``phi = du/dalpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from types import SimpleNamespace

import numpy as np
from scipy.optimize import brentq

from . import _rk
from . import io as rio
from ._jit import interpreted_namespace
from .errors import AccuracyError, DomainError, PreconditionError, RangeError, StiffnessError

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_TINY = 1e-30


def _kernels(f):
    """Kernel namespace for ``f``: the compiled module for built-in families,
    an interpreted copy wired to the Python evaluators otherwise."""
    if f.code >= 0:
        return _rk
    fev, fdiff = f.fev, f.fdiff
    extra = {
        "evaluate": lambda kind, params, u: fev(params, u),
        "difference": lambda kind, params, u, w: fdiff(params, u, w),
    }
    g = interpreted_namespace({**vars(_rk), **extra}, _rk.KERNEL_NAMES)
    return SimpleNamespace(**{k: g[k] for k in _rk.KERNEL_NAMES})


@dataclass(frozen=True)
class SolverConfig:
    """Integration controls.

    ``atol`` is relative to the initial value for positive families (the
    equation has no natural absolute scale), plain absolute otherwise.
    """

    rtol: float = 1e-10
    atol: float = 1e-12
    r_max: float = 1e3
    event_tol: float = 1e-12
    max_steps: int = 5_000_000

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0 and self.r_max > 0):
            raise DomainError("tolerances and r_max must be positive")

    def tightened(self, factor=0.5):
        return replace(self, rtol=self.rtol * factor, atol=self.atol * factor)

    def with_rmax(self, r_max):
        return replace(self, r_max=float(r_max))

    def to_dict(self):
        return {"rtol": self.rtol, "atol": self.atol, "r_max": self.r_max, "event_tol": self.event_tol}


DEFAULT_CONFIG = SolverConfig()


def start_radius(f1):
    return min(1e-4, 1e-2 / math.sqrt(abs(f1) + 1.0))


def _series(N, alpha, f0, f1, r):
    a = -f0 / (2.0 * N)
    b = f1 * f0 / (8.0 * N * (N + 2.0))
    return alpha + a * r * r + b * r**4, 2.0 * a * r + 4.0 * b * r**3


def _check_alpha(f, alpha):
    alpha = float(alpha)
    if not math.isfinite(alpha):
        raise DomainError("initial value must be finite")
    if not getattr(f, "allows_negative", False) and not alpha > 0.0:
        raise DomainError(f"initial value must be positive, got {alpha!r}")
    return alpha


def _scale(f, alpha):
    return 1.0 if getattr(f, "allows_negative", False) else abs(alpha)


def _atol_vector(config, sc, second=None):
    # u' < 0 throughout the integrated range, so it gets pure relative control;
    # an absolute floor there would be amplified by 1/h in u'' near the origin
    second = config.atol * sc if second is None else second
    return np.array([config.atol * sc, _TINY * sc, second, second])


def _raise_status(status, rs):
    r = float(rs[-1])
    if status == _rk.STATUS_UNDERFLOW:
        raise StiffnessError(f"step size underflow at r={r:.6g}", r)
    if status == _rk.STATUS_MAXSTEPS:
        raise AccuracyError(f"step budget exhausted at r={r:.6g}", achieved=r)


def _run(f, N, mode, r0, y0, config, atol, stop_zero, stop_cross=False):
    K = _kernels(f)
    rs, ys, status = K.integrate(
        f.code,
        f.kparams,
        mode,
        float(N),
        float(r0),
        np.asarray(y0, dtype=float),
        float(config.r_max),
        float(config.rtol),
        np.asarray(atol, dtype=float),
        bool(stop_zero),
        bool(stop_cross),
        int(config.max_steps),
    )
    _raise_status(status, rs)
    return K, rs, ys, status


def _with_origin(K, f, N, mode, rs, ys, origin_row, origin_d1, origin_d2):
    d1, d2 = K.jet_many(f.code, f.kparams, mode, float(N) - 1.0, rs, ys)
    rs = np.concatenate(([0.0], rs))
    ys = np.vstack((origin_row, ys))
    d1 = np.vstack((origin_d1, d1))
    d2 = np.vstack((origin_d2, d2))
    return rs, ys, d1, d2


class _Track:
    """Nodes plus quintic Hermite dense output for up to two (y, y') pairs."""

    def __init__(self, N, rs, ys, d1, d2):
        self.N = int(N)
        self.r = rs
        self._y = ys
        self._d1 = d1
        self._d2 = d2
        for arr in (rs, ys, d1, d2):
            arr.setflags(write=False)

    @property
    def r_lo(self):
        return float(self.r[0])

    @property
    def r_hi(self):
        return float(self.r[-1])

    def _dense(self, comp, x):
        scalar = np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        span = self.r_hi - self.r_lo
        slack = 1e-13 * max(1.0, self.r_hi)
        if np.any(x < self.r_lo - slack) or np.any(x > self.r_hi + slack) or np.any(np.isnan(x)):
            raise RangeError(f"r outside [{self.r_lo:g}, {self.r_hi:g}]")
        x = np.clip(x, self.r_lo, self.r_hi)
        if span == 0.0:
            out = tuple(np.full_like(x, v) for v in (self._y[0, comp], self._d1[0, comp], self._y[0, comp + 1], self._d1[0, comp + 1]))
        else:
            out = _rk.dense_eval(self.r, self._y, self._d1, self._d2, comp, np.ascontiguousarray(x))
        if scalar:
            return tuple(float(v[0]) for v in out)
        return out

    def midpoints(self):
        return 0.5 * (self.r[1:] + self.r[:-1])


class RadialProfile(_Track):
    """A computed solution u(., alpha), immutable.

    ``first_zero`` is the refined first zero, or ``None`` when u stays
    positive up to ``r_max`` (which says nothing about larger radii).
    """

    def __init__(self, nonlinearity, N, alpha, rs, ys, d1, d2, first_zero, config):
        super().__init__(N, rs, ys, d1, d2)
        self.nonlinearity = nonlinearity
        self.alpha = float(alpha)
        self.first_zero = first_zero
        self.config = config
        self.r_max = float(config.r_max)

    @property
    def u(self):
        return self._y[:, 0]

    @property
    def du(self):
        return self._y[:, 1]

    @property
    def samples(self):
        return np.column_stack((self.r, self.u, self.du))

    def evaluate(self, r):
        """(u, u') at r, by dense output."""
        v, _, dv, _ = self._dense(0, r)
        return v, dv

    def residual(self, r):
        """Relative ODE residual ``|u'' + (N-1)u'/r + f(u)| / (|(N-1)u'/r| + |f(u)|)``."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        u, _, du, ddu = self._dense(0, r)
        f = self.nonlinearity.f_vec(u)[0]
        drift = (self.N - 1.0) * du / r
        return np.abs(ddu + drift + f) / (np.abs(drift) + np.abs(f))

    def to_dict(self):
        return {
            "N": self.N,
            "alpha": self.alpha,
            "first_zero": self.first_zero,
            "r_max": self.r_max,
            "tolerances": self.config.to_dict(),
            "nodes": int(self.r.shape[0]),
        }

    def to_csv(self, path):
        """Write r,u,du to ``path`` and a JSON sidecar next to it."""
        path = Path(path)
        rio.write_csv(path, ["r", "u", "du"], [self.r, self.u, self.du])
        rio.write_json(path.with_suffix(".json"), self.to_dict())


def solve_ivp(spec, N, alpha, config=None):
    """Shoot from u(0) = alpha; stop at the first zero of u or at r_max."""
    config = config or DEFAULT_CONFIG
    if int(N) != N or N < 1:
        raise DomainError("N must be a positive integer")
    alpha = _check_alpha(spec, alpha)
    f0, f1, _ = (float(v) for v in spec.fev(spec.kparams, alpha))
    r0 = min(start_radius(f1), 0.5 * config.r_max)
    u0, du0 = _series(N, alpha, f0, f1, r0)
    sc = _scale(spec, alpha)
    atol = _atol_vector(config, sc)
    stop = not getattr(spec, "allows_negative", False)
    K, rs, ys, status = _run(spec, N, 0, r0, [u0, du0, 0.0, 0.0], config, atol, stop)
    rs, ys, d1, d2 = _with_origin(
        K, spec, N, 0, rs, ys, [alpha, 0.0, 0.0, 0.0], [0.0, -f0 / N, 0.0, 0.0], [-f0 / N, 0.0, 0.0, 0.0]
    )
    first_zero = float(rs[-1]) if status == _rk.STATUS_ZERO else None
    return RadialProfile(spec, N, alpha, rs, ys, d1, d2, first_zero, config)


class PairSolution(_Track):
    """A profile u together with the gap ``w = v - u`` to a second solution v.

    When ``beta`` is set, v = u(., beta); otherwise v is whatever solution
    the caller started at ``r_lo`` (an exact singular solution, say).
    """

    def __init__(self, nonlinearity, N, alpha, beta, rs, ys, d1, d2, first_zero, config, status):
        super().__init__(N, rs, ys, d1, d2)
        self.nonlinearity = nonlinearity
        self.alpha = float(alpha)
        self.beta = beta
        self.first_zero = first_zero
        self.config = config
        self.stopped_after_crossing = status == _rk.STATUS_CROSS
        self._refine = None
        self._noise = None

    @property
    def u(self):
        return self._y[:, 0]

    @property
    def w(self):
        return self._y[:, 2]

    @property
    def v(self):
        return self._y[:, 0] + self._y[:, 2]

    def evaluate(self, r):
        """(u, w) at r."""
        u = self._dense(0, r)[0]
        w = self._dense(2, r)[0]
        return u, w

    def raw_crossings(self):
        """Every sign change of w at the nodes, refined on the dense output."""
        w = self.w
        idx = np.nonzero(np.sign(w[1:]) * np.sign(w[:-1]) < 0)[0]
        out = []
        for k in idx:
            a, b = float(self.r[k]), float(self.r[k + 1])
            out.append(brentq(lambda x: self._dense(2, x)[0], a, b, xtol=self.config.event_tol, rtol=1e-15))
        return out

    def noise(self):
        """Estimated error of w at the nodes: distance to a run at 100x tighter tolerances.

        Needed because a decaying gap can be swamped by a non-decaying error
        mode; a relative tolerance alone does not bound it.
        """
        if self._noise is None:
            ref = self._refine(replace(self.config.tightened(1e-2), r_max=self.r_hi))
            inside = self.r <= ref.r_hi
            est = np.full(self.r.shape, np.inf)
            est[inside] = np.abs(self.w[inside] - ref._dense(2, self.r[inside])[0])
            self._noise = est
        return self._noise

    def crossings(self, resolve=10.0):
        """Sign changes of w with both profiles positive and the sign resolved on both sides.

        A side counts as resolved when somewhere between this crossing and the
        neighbouring one |w| exceeds ``resolve`` times the error estimate.
        """
        raw = self.raw_crossings()
        if not raw:
            return []
        noise = self.noise()
        edges = [self.r_lo] + raw + [self.r_hi]
        solid = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            seg = (self.r >= lo) & (self.r <= hi)
            solid.append(bool(np.any(np.abs(self.w[seg]) > resolve * noise[seg])))
        out = []
        for i, rc in enumerate(raw):
            if not (solid[i] and solid[i + 1]):
                continue
            u, w_ = self.evaluate(rc)
            if u > 0.0 and u + w_ > 0.0:
                out.append(rc)
        return out

    def verified_crossing(self):
        """First resolved crossing with both profiles positive, or None."""
        found = self.crossings()
        return found[0] if found else None


def solve_pair(spec, N, alpha, beta=None, config=None, partner=None, stop_after_crossing=False):
    """Integrate u(., alpha) with the gap to u(., beta), or to a given partner.

    ``partner`` is a callable ``r -> (v, v')`` giving an exact solution at
    the starting radius; with it the integration starts at ``r_start`` and
    there is no origin node.
    """
    config = config or DEFAULT_CONFIG
    alpha = _check_alpha(spec, alpha)
    f0, f1, _ = (float(v) for v in spec.fev(spec.kparams, alpha))
    sc = _scale(spec, alpha)
    stop = not getattr(spec, "allows_negative", False)
    nm1 = float(N) - 1.0
    if partner is None:
        if beta is None:
            raise DomainError("need beta or a partner")
        beta = _check_alpha(spec, beta)
        if beta == alpha:
            raise DomainError("pair needs two distinct initial values")
        g0, g1, _ = (float(v) for v in spec.fev(spec.kparams, beta))
        r0 = min(start_radius(max(f1, g1)), 0.5 * config.r_max)
        u0, du0 = _series(N, alpha, f0, f1, r0)
        df0, _ = spec.fdiff(spec.kparams, alpha, beta - alpha)
        df0 = float(df0)
        b_diff = (g1 * g0 - f1 * f0) / (8.0 * N * (N + 2.0))
        w0 = (beta - alpha) - df0 / (2.0 * N) * r0 * r0 + b_diff * r0**4
        dw0 = -df0 / N * r0 + 4.0 * b_diff * r0**3
        y0 = [u0, du0, w0, dw0]
        wscale = abs(beta - alpha)
    else:
        r0 = min(start_radius(f1), 0.5 * config.r_max)
        u0, du0 = _series(N, alpha, f0, f1, r0)
        v0, dv0 = partner(r0)
        y0 = [u0, du0, float(v0) - u0, float(dv0) - du0]
        wscale = abs(y0[2])
    atol = _atol_vector(config, sc, 1e-30 * wscale)
    K, rs, ys, status = _run(spec, N, 1, r0, y0, config, atol, stop, stop_after_crossing)
    if partner is None:
        w_dd = -df0 / N
        rs, ys, d1, d2 = _with_origin(
            K,
            spec,
            N,
            1,
            rs,
            ys,
            [alpha, 0.0, beta - alpha, 0.0],
            [0.0, -f0 / N, 0.0, w_dd],
            [-f0 / N, 0.0, w_dd, 0.0],
        )
    else:
        d1, d2 = K.jet_many(spec.code, spec.kparams, 1, nm1, rs, ys)
    first_zero = float(rs[-1]) if status == _rk.STATUS_ZERO else None
    out = PairSolution(spec, N, alpha, beta, rs, ys, d1, d2, first_zero, config, status)
    out._refine = lambda cfg: solve_pair(spec, N, alpha, beta, cfg, partner)
    return out


class LinearizedProfile:
    """phi solving the linearised equation along a base profile.

    ``phi(0) = 1, phi'(0) = 0`` for a regular base, so phi = du/dalpha.
    """

    def __init__(self, base, r, phi, dphi, zeros, evaluator):
        self.base = base
        self.r = r
        self.phi = phi
        self.dphi = dphi
        self.zeros = zeros
        self._eval = evaluator

    def evaluate(self, r):
        return self._eval(r)

    def to_csv(self, path):
        path = Path(path)
        rio.write_csv(path, ["r", "phi", "dphi"], [self.r, self.phi, self.dphi])
        meta = {"zeros": list(self.zeros), "r_max": float(self.r[-1])}
        if isinstance(self.base, RadialProfile):
            meta.update({"N": self.base.N, "alpha": self.base.alpha})
        rio.write_json(path.with_suffix(".json"), meta)


def _sign_changes(r, y, fun, xtol):
    out = []
    idx = np.nonzero(np.sign(y[1:]) * np.sign(y[:-1]) < 0)[0]
    for k in idx:
        out.append(brentq(fun, float(r[k]), float(r[k + 1]), xtol=xtol, rtol=1e-15))
    return out


def solve_linearized(spec, base, config=None):
    """Integrate the linearisation along ``base`` and record the zeros of phi.

    For a regular base the profile and phi are integrated as one system, so
    they share every step.  A base that only exists on ``[r_min, r_max]``
    (a singular profile) is handled with ``phi(r_min) = 1, phi'(r_min) = 0``
    and the base's dense output.
    """
    if isinstance(base, RadialProfile):
        config = config or base.config
        alpha = base.alpha
        f0, f1, f2 = (float(v) for v in spec.fev(spec.kparams, alpha))
        N = base.N
        r0 = min(start_radius(f1), 0.5 * config.r_max)
        u0, du0 = _series(N, alpha, f0, f1, r0)
        c = -f1 / (2.0 * N)
        a = -f0 / (2.0 * N)
        d = -(f1 * c + f2 * a) / (4.0 * (N + 2.0))
        y0 = [u0, du0, 1.0 + c * r0 * r0 + d * r0**4, 2.0 * c * r0 + 4.0 * d * r0**3]
        sc = _scale(spec, alpha)
        atol = _atol_vector(config, sc, config.atol)
        stop = not getattr(spec, "allows_negative", False)
        K, rs, ys, status = _run(spec, N, 2, r0, y0, config, atol, stop)
        rs, ys, d1, d2 = _with_origin(
            K,
            spec,
            N,
            2,
            rs,
            ys,
            [alpha, 0.0, 1.0, 0.0],
            [0.0, -f0 / N, 0.0, -f1 / N],
            [-f0 / N, 0.0, -f1 / N, 0.0],
        )
        track = _Track(N, rs, ys, d1, d2)

        def phi_at(x):
            v, _, dv, _ = track._dense(2, x)
            return v, dv

        phi = ys[:, 2]
        zeros = _sign_changes(rs, phi, lambda x: phi_at(x)[0], config.event_tol)
        first_zero = float(rs[-1]) if status == _rk.STATUS_ZERO else None
        joint = RadialProfile(spec, N, alpha, rs, ys, d1, d2, first_zero, config)
        return LinearizedProfile(joint, rs, phi, ys[:, 3], zeros, phi_at)

    from scipy.integrate import solve_ivp as scipy_ivp

    config = config or DEFAULT_CONFIG
    N = base.N
    r_lo, r_hi = base.r_lo, base.r_hi

    def rhs(r, y):
        u = base.evaluate(r)[0]
        fp = spec.f_vec(np.atleast_1d(u))[1][0]
        return [y[1], -(N - 1.0) / r * y[1] - fp * y[0]]

    sol = scipy_ivp(rhs, (r_lo, r_hi), [1.0, 0.0], method="DOP853", rtol=config.rtol, atol=config.atol, dense_output=True)
    if not sol.success:
        raise AccuracyError(f"linearised solve failed: {sol.message}")

    def phi_at(x):
        y = sol.sol(x)
        return y[0], y[1]

    zeros = _sign_changes(sol.t, sol.y[0], lambda x: float(sol.sol(x)[0]), config.event_tol)
    return LinearizedProfile(base, sol.t, sol.y[0], sol.y[1], zeros, phi_at)


def verify_mass_identity(profile, spec=None):
    """Largest relative defect of ``-r^{N-1} u'(r) = int_0^r s^{N-1} f(u(s)) ds`` over the nodes."""
    spec = spec or profile.nonlinearity
    N = profile.N
    r = profile.r
    a, b = r[:-1], r[1:]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    s = mid[:, None] + half[:, None] * _GL_X
    u = profile.evaluate(s.ravel())[0].reshape(s.shape)
    f = spec.f_vec(u)[0]
    pieces = half * ((s ** (N - 1) * f) @ _GL_W)
    rhs = np.cumsum(pieces)
    lhs = -(b ** (N - 1)) * profile.du[1:]
    ok = np.abs(lhs) > 0
    if not np.any(ok):
        return 0.0
    return float(np.max(np.abs(lhs[ok] - rhs[ok]) / np.abs(lhs[ok])))


def verify_F_lower_bound(profile, spec=None):
    """min over nodes and midpoints of ``F(u(r)) - r^2/(2N)``."""
    spec = spec or profile.nonlinearity
    if profile.first_zero is not None:
        raise PreconditionError(f"profile vanishes at r={profile.first_zero:.6g}; the bound needs a positive solution")
    r = np.concatenate((profile.r, profile.midpoints()))
    u = profile.evaluate(r)[0]
    return float(np.min(spec.F(u) - r * r / (2.0 * profile.N)))
