"""Generalised scaling between ``Delta u + f(u) = 0`` and the model equations.

For a model nonlinearity g (``v^p`` or ``e^v``) with ``G(v) = int_v^inf dt/g``,
a positive solution u is carried to

    v(s) = G^{-1}(lambda^{-2} F(u(lambda s)))

which solves the model equation up to a term proportional to
``f'(u)F(u) - q``; the inverse map is ``u(x) = F^{-1}(lambda^2 G(v(x/lambda)))``.
For f = g the map is the classical scaling ``lambda^{2/(p-1)} u(lambda s)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _families as fam
from . import io as rio
from .errors import DomainError, PreconditionError
from .nonlinearity import critical_exponents
from .radial_ode import DEFAULT_CONFIG, solve_ivp, solve_pair


@dataclass(frozen=True)
class ScalingModel:
    """The model nonlinearity: ``Power(p)`` or ``Exponential``.

    Exposes the same evaluation protocol as a nonlinearity spec so the
    radial solver can integrate model profiles directly.
    """

    kind: str
    p: float = math.inf
    params: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind == "power":
            if not self.p > 1.0:
                raise DomainError("model power needs p > 1")
            object.__setattr__(self, "params", (float(self.p),))
            object.__setattr__(self, "code", fam.POWER)
            object.__setattr__(self, "fev", fam.power_eval)
            object.__setattr__(self, "fdiff", fam.power_diff)
        elif self.kind == "exponential":
            object.__setattr__(self, "params", (0.0,))
            object.__setattr__(self, "code", fam.EXPONENTIAL)
            object.__setattr__(self, "fev", fam.exponential_eval)
            object.__setattr__(self, "fdiff", fam.exponential_diff)
        else:
            raise DomainError(f"unknown model kind {self.kind!r}")
        object.__setattr__(self, "kparams", np.asarray(self.params, dtype=float))

    @property
    def allows_negative(self):
        return self.kind == "exponential"

    @property
    def q(self):
        return 1.0 if self.kind == "exponential" else self.p / (self.p - 1.0)

    def to_config(self):
        return {"kind": "power", "p": self.p} if self.kind == "power" else {"kind": "exponential"}

    def __str__(self):
        return f"v^{self.p:g}" if self.kind == "power" else "e^v"

    def _check(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "power" and np.any(~(v > 0.0)):
            raise DomainError("power model needs v > 0")
        return v

    def f_vec(self, v):
        v = np.asarray(v, dtype=float)
        flat = np.ascontiguousarray(v.ravel())
        f, f1, f2 = fam.eval_many(self.code, self.kparams, flat)
        return f.reshape(v.shape), f1.reshape(v.shape), f2.reshape(v.shape)

    def g(self, v):
        return self.f_vec(v)[0]

    def G(self, v):
        scalar = np.ndim(v) == 0
        v = self._check(v)
        if self.kind == "power":
            out = np.power(v, 1.0 - self.p) / (self.p - 1.0)
        else:
            out = np.exp(-v)
        return float(out) if scalar else out

    def G_inv(self, x):
        scalar = np.ndim(x) == 0
        x = np.asarray(x, dtype=float)
        if np.any(~(x > 0.0)):
            raise DomainError("G^-1 needs a positive argument")
        if self.kind == "power":
            out = np.power((self.p - 1.0) * x, -1.0 / (self.p - 1.0))
        else:
            out = -np.log(x)
        return float(out) if scalar else out

    # spec-compatible names, so a model can stand in for f
    def F(self, v):
        return self.G(v)

    def invert_F(self, x):
        return self.G_inv(x)

    def q_of(self, v):
        return self.f_vec(v)[1] * self.G(v)


def power_model(p):
    return ScalingModel("power", float(p))


def exponential_model():
    return ScalingModel("exponential")


def model_from_q(q):
    """Power model with exponent ``q/(q-1)``, or the exponential one when ``q == 1``."""
    if q < 1.0:
        raise DomainError("q must be at least 1")
    if q == 1.0:
        return exponential_model()
    return power_model(q / (q - 1.0))


# -- exact reference solutions ------------------------------------------------


@dataclass(frozen=True)
class ModelReference:
    """The explicit singular solution of the model equation.

    ``W(r) = L r^{-2/(p-1)}`` for the power model, ``Z(r) = -2 log r + log(2N-4)``
    for the exponential one.
    """

    model: ScalingModel
    N: int
    L: float = math.nan

    def __call__(self, r):
        return self.evaluate(r)[0]

    def evaluate(self, r):
        r = np.asarray(r, dtype=float)
        if self.model.kind == "power":
            k = 2.0 / (self.model.p - 1.0)
            val = self.L * np.power(r, -k)
            return val, -k * val / r
        return -2.0 * np.log(r) + math.log(2.0 * self.N - 4.0), -2.0 / r

    def residual(self, r):
        """Relative residual of the model equation, from the closed-form second derivative."""
        r = np.asarray(r, dtype=float)
        val, d1 = self.evaluate(r)
        if self.model.kind == "power":
            k = 2.0 / (self.model.p - 1.0)
            d2 = k * (k + 1.0) * val / (r * r)
        else:
            d2 = 2.0 / (r * r)
        g = self.model.g(val)
        drift = (self.N - 1.0) * d1 / r
        return np.abs(d2 + drift + g) / (np.abs(d2) + np.abs(drift) + np.abs(g))


def singular_constant(p, N):
    k = 2.0 / (p - 1.0)
    base = k * (N - 2.0 - k)
    if not base > 0.0:
        raise DomainError(f"no singular power solution for p={p:g}, N={N}")
    return base ** (1.0 / (p - 1.0))


def model_reference(model, N, check=True):
    """W or Z for ``model`` in dimension N.

    With ``check`` the bound hypotheses are enforced: N >= 11 and p >= p_JL for
    the power model, N >= 10 for the exponential one.
    """
    if model.kind == "power":
        if check:
            ce = critical_exponents(N)
            if N < 11 or model.p < ce.p_JL:
                raise DomainError(f"W bound needs N >= 11 and p >= p_JL; got N={N}, p={model.p:g}")
        return ModelReference(model, int(N), singular_constant(model.p, N))
    if check and N < 10:
        raise DomainError("Z bound needs N >= 10")
    return ModelReference(model, int(N))


# -- the transform --------------------------------------------------------------


class MappedProfile:
    """A profile obtained by transforming another one.

    ``r``, ``u``, ``du`` hold samples on the mapped grid; :meth:`evaluate`
    transforms the source's dense output on the fly.
    """

    def __init__(self, source, target, other, lam, direction, N, r, u, du, first_zero):
        self.source = source
        self.nonlinearity = target
        self.other = other
        self.lam = float(lam)
        self.direction = direction
        self.N = N
        self.r = r
        self.u = u
        self.du = du
        self.first_zero = first_zero

    @property
    def alpha(self):
        return float(self.u[0]) if self.r[0] == 0.0 else math.nan

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        if self.direction == "push":
            return _push_values(self.other, self.nonlinearity, self.lam, self.source, x * self.lam)
        return _pull_values(self.nonlinearity, self.other, self.lam, self.source, x / self.lam)

    def to_csv(self, path):
        rio.write_csv(path, ["r", "u", "du"], [self.r, self.u, self.du])


def _push_values(spec, model, lam, profile, r):
    u, du = profile.evaluate(r)
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0.0)):
        raise DomainError("push-forward needs a positive profile")
    v = model.G_inv(spec.F(u) / (lam * lam))
    g = model.g(np.asarray(v))
    f = spec.f_vec(u)[0]
    return v, g * du / (lam * f)


def _pull_values(spec, model, lam, vprofile, y):
    v, dv = vprofile.evaluate(y)
    u = spec.invert_F(lam * lam * model.G(v))
    f = spec.f_vec(np.asarray(u))[0]
    g = model.g(np.asarray(v, dtype=float))
    return u, lam * f * dv / g


def _positive_part(profile):
    keep = profile.u > 0.0
    return profile.r[keep], keep


def push_forward(spec, profile, model, lam):
    """``v(s) = G^{-1}(lambda^{-2} F(u(lambda s)))`` sampled at ``s = r/lambda``."""
    if not lam > 0.0:
        raise DomainError("lambda must be positive")
    r, _ = _positive_part(profile)
    v, dv = _push_values(spec, model, lam, profile, r)
    fz = None if profile.first_zero is None else profile.first_zero / lam
    return MappedProfile(profile, model, spec, lam, "push", profile.N, r / lam, v, dv, fz)


def pull_back(spec, vprofile, lam, model):
    """``u(x) = F^{-1}(lambda^2 G(v(x/lambda)))`` sampled at ``x = lambda y``."""
    if not lam > 0.0:
        raise DomainError("lambda must be positive")
    y = vprofile.r
    if model.kind == "power":
        y, _ = _positive_part(vprofile)
    u, du = _pull_values(spec, model, lam, vprofile, y)
    fz = None if vprofile.first_zero is None else vprofile.first_zero * lam
    return MappedProfile(vprofile, spec, model, lam, "pull", vprofile.N, y * lam, u, du, fz)


def gradient_invariant(nonlin, profile):
    """``u'^2 / (f(u)^2 F(u))`` on the profile's grid; the transform preserves it."""
    f = nonlin.f_vec(profile.u)[0]
    return profile.du**2 / (f * f * nonlin.F(profile.u))


def perturbation_term(spec, model, vprofile):
    """The extra term ``(f'(u)F(u) - q) v'^2 / (g(v)G(v))`` of the transformed equation.

    The pushed-forward profile satisfies ``v'' + (N-1)v'/s + g(v) + term = 0``.

    ``vprofile`` must come from :func:`push_forward`.
    """
    u, _ = vprofile.source.evaluate(vprofile.r * vprofile.lam)
    v = vprofile.u
    q_u = spec.q_of(u)
    return (q_u - model.q) * vprofile.du**2 / (model.g(v) * model.G(v))


def model_equation_residual(vprofile, s, h_rel=1e-5):
    """``v'' + (N-1)v'/s + g(v)`` at s, with v'' by central differences of v'."""
    s = np.asarray(s, dtype=float)
    h = h_rel * s
    v, dv = vprofile.evaluate(s)
    dv_plus = vprofile.evaluate(s + h)[1]
    dv_minus = vprofile.evaluate(s - h)[1]
    ddv = (dv_plus - dv_minus) / (2.0 * h)
    return ddv + (vprofile.N - 1.0) * dv / s + vprofile.nonlinearity.g(v)


def beta_of_alpha(spec, model, sigma, alpha):
    """The beta with ``F(beta)/F(alpha) = G(sigma)/G(1)``."""
    if not alpha > 0.0:
        raise DomainError("alpha must be positive")
    if sigma == 1.0:
        return float(alpha)
    return float(spec.invert_F(spec.F(alpha) * model.G(sigma) / model.G(1.0)))


def lambda_of_alpha(spec, model, alpha):
    return math.sqrt(spec.F(alpha) / model.G(1.0))


# -- model bounds ------------------------------------------------------------


@dataclass
class ModelBoundsReport:
    N: int
    model: str
    q1: float
    rows: list

    @property
    def ok(self):
        return all(row["gap_min_rel"] > 0.0 and row["G_margin_min_rel"] > 0.0 for row in self.rows)

    def to_dict(self):
        return {"N": self.N, "model": self.model, "q1": self.q1, "rows": self.rows, "ok": self.ok}


def verify_model_bounds(model, N, sigma_grid, config=None, q1=None):
    """Check ``w(., sigma) < W`` (or Z) and ``G(w) > r^2/(2N - 4 q1)`` along each profile.

    The gap to the singular solution is integrated as its own unknown, so
    the margins stay meaningful even where they are far below the solver
    tolerance relative to w.
    """
    config = config or DEFAULT_CONFIG
    ref = model_reference(model, N)
    q1 = model.q if q1 is None else float(q1)
    denom = 2.0 * N - 4.0 * q1
    rows = []
    for sigma in sigma_grid:
        pair = solve_pair(model, N, sigma, config=config, partner=ref.evaluate)
        r = pair.r
        w = pair.u
        gap = pair.w
        W = w + gap
        if model.kind == "power":
            # G(w) - G(W) = G(W) ((W/w)^{p-1} - 1)
            GW = model.G(W)
            excess = GW * np.expm1((model.p - 1.0) * np.log1p(gap / w))
        else:
            GW = np.exp(-W)
            excess = -np.exp(-w) * np.expm1(-gap)
        bound = r * r / denom
        # G(W) equals the bound exactly when q1 matches the model; add the
        # closed-form difference otherwise
        margin = excess + (GW - bound)
        rows.append(
            {
                "sigma": float(sigma),
                "r_max": float(r[-1]),
                "gap_min": float(np.min(gap)),
                "gap_min_rel": float(np.min(gap / np.abs(W))),
                "G_margin_min_rel": float(np.min(margin / bound)),
                "first_zero": pair.first_zero,
            }
        )
    return ModelBoundsReport(int(N), str(model), q1, rows)


# -- convergence of transformed profiles ------------------------------------------


@dataclass
class ConvergenceStudy:
    sigma: float
    S: float
    s0: float | None
    alphas: list
    errors: list
    model: str

    @property
    def strictly_decreasing(self):
        e = self.errors
        return all(b < a for a, b in zip(e, e[1:]))

    def to_dict(self):
        return {
            "sigma": self.sigma,
            "S": self.S,
            "s0": self.s0,
            "model": self.model,
            "alphas": self.alphas,
            "sup_errors": self.errors,
            "strictly_decreasing": self.strictly_decreasing,
        }

    def to_csv(self, path):
        rio.write_csv(path, ["alpha", "sup_error"], [self.alphas, self.errors])


def model_first_zero(model, N, sigma, config=None):
    return solve_ivp(model, N, sigma, config or DEFAULT_CONFIG).first_zero


def convergence_study(spec, N, model, sigma, alpha_sequence, S=None, config=None, n_grid=512, executor=None):
    """Sup-distance on [0, S] between the transformed ``u(., beta(alpha))`` and ``z(., sigma)``.

    ``S`` defaults to half the first zero of z, or half of ``r_max`` when z
    stays positive there.
    """
    config = config or DEFAULT_CONFIG
    z = solve_ivp(model, N, sigma, config)
    s0 = z.first_zero
    if S is None:
        S = 0.5 * (s0 if s0 is not None else config.r_max)
    if s0 is not None and S >= s0:
        raise PreconditionError(f"S={S:g} must lie below the first zero s0={s0:g}")
    if S > z.r_hi:
        raise PreconditionError(f"S={S:g} beyond the model profile range {z.r_hi:g}")
    grid = np.linspace(0.0, S, n_grid)
    zs = z.evaluate(grid)[0]

    def one(alpha):
        lam = lambda_of_alpha(spec, model, alpha)
        beta = beta_of_alpha(spec, model, sigma, alpha)
        cfg = config.with_rmax(max(config.r_max, 1.0001 * lam * S))
        u = solve_ivp(spec, N, beta, cfg)
        if u.first_zero is not None and u.first_zero <= lam * S:
            raise PreconditionError(f"u(., {beta:g}) vanishes at r={u.first_zero:g} inside the window")
        v = _push_values(spec, model, lam, u, grid * lam)[0]
        return float(np.max(np.abs(v - zs)))

    alphas = [float(a) for a in alpha_sequence]
    errors = list(executor.map(one, alphas)) if executor is not None else [one(a) for a in alphas]
    return ConvergenceStudy(float(sigma), float(S), s0, alphas, errors, str(model))


# -- intersections of model profiles ----------------------------------------------


def model_crossings(model, N, sigma1, sigma2, r_max, config=None):
    """Radii in (0, r_max] where ``z(., sigma1) - z(., sigma2)`` changes sign."""
    if not sigma1 > sigma2:
        raise DomainError("need sigma1 > sigma2")
    config = (config or DEFAULT_CONFIG).with_rmax(r_max)
    pair = solve_pair(model, N, sigma2, sigma1, config)
    return pair.crossings()


def count_model_intersections(model, N, sigma1, sigma2, r_max, config=None):
    return len(model_crossings(model, N, sigma1, sigma2, r_max, config))


def intersection_growth(model, N, sigma1, sigma2, radii=(10.0, 100.0, 1000.0), config=None, minimum=3):
    """Zero counts along ``radii``; ``unbounded`` when they grow and reach ``minimum`` at the end."""
    crossings = model_crossings(model, N, sigma1, sigma2, max(radii), config)
    counts = [sum(1 for c in crossings if c <= R) for R in radii]
    growing = all(b >= a for a, b in zip(counts, counts[1:])) and counts[-1] > counts[0]
    return {"radii": list(radii), "counts": counts, "unbounded": bool(growing and counts[-1] >= minimum)}
