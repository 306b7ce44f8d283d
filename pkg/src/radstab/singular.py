"""The singular radial solution as the increasing limit of regular profiles.

Only the range ``[r_min, r_max]`` with ``r_min > 0`` is represented; the limit
blows up at the origin.  The error estimate is the last ladder increment,
which is a lower bound on the true gap to the limit.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io as rio
from .errors import ConsistencyError, DomainError, HypothesisError, PreconditionError
from .nonlinearity import critical_exponents
from .radial_ode import DEFAULT_CONFIG, solve_ivp, solve_pair

log = logging.getLogger(__name__)

DEFAULT_LADDER = (1e1, 1e2, 1e3, 1e4, 1e5, 1e6)


def hardy_margin(r, u, spec, N):
    """Pointwise ``(N-2)^2/4 - r^2 f'(u)``."""
    r = np.asarray(r, dtype=float)
    fp = spec.f_vec(np.asarray(u, dtype=float))[1]
    return (N - 2.0) ** 2 / 4.0 - r * r * fp


def _log_grid(r_min, r_max, per_decade=64):
    n = int(math.ceil(math.log10(r_max / r_min) * per_decade)) + 1
    return np.logspace(math.log10(r_min), math.log10(r_max), n)


class SingularProfile:
    """Top ladder profile restricted to ``[r_min, r_max]`` plus convergence data."""

    def __init__(self, spec, N, ladder, profiles, r, defects, step_defects, ordering, decay_exponent, residual_max):
        self.nonlinearity = spec
        self.N = N
        self.ladder = tuple(float(a) for a in ladder)
        self.profiles = tuple(profiles)
        self.top = profiles[-1]
        self.r = r
        self.u, self.du = self.top.evaluate(r)
        self.defects = defects
        self.step_defects = step_defects
        self.ordering = ordering
        self.decay_exponent = decay_exponent
        self.residual_max = residual_max
        for arr in (self.r, self.u, self.du, self.defects):
            arr.setflags(write=False)

    @property
    def r_lo(self):
        return float(self.r[0])

    @property
    def r_hi(self):
        return float(self.r[-1])

    @property
    def error_estimate(self):
        return float(self.step_defects[-1]) if self.step_defects else math.nan

    def evaluate(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < self.r_lo * (1 - 1e-13)) or np.any(r > self.r_hi * (1 + 1e-13)):
            raise DomainError(f"singular profile covers [{self.r_lo:g}, {self.r_hi:g}] only")
        return self.top.evaluate(r)

    def residual(self, r):
        return self.top.residual(r)

    def to_dict(self):
        return {
            "N": self.N,
            "ladder": list(self.ladder),
            "r_min": self.r_lo,
            "r_max": self.r_hi,
            "defects": list(self.step_defects),
            "error_estimate": self.error_estimate,
            "ordering": self.ordering,
            "decay_exponent": self.decay_exponent,
            "residual_max": self.residual_max,
        }

    def to_csv(self, path):
        path = Path(path)
        rio.write_csv(path, ["r", "u", "du", "defect"], [self.r, self.u, self.du, self.defects])
        rio.write_json(path.with_suffix(".json"), self.to_dict())


def _decay_fit(r, u, r_min):
    sel = r <= 10.0 * r_min * (1 + 1e-12)
    slope, _ = np.polyfit(np.log(r[sel]), np.log(u[sel]), 1)
    return float(slope)


def approximate_singular(
    spec,
    N,
    alpha_ladder=DEFAULT_LADDER,
    r_min=1e-2,
    r_max=1e2,
    config=None,
    structure=None,
    override=False,
    threads=1,
    per_decade=64,
):
    """Approximate the singular solution by a ladder of regular profiles.

    ``structure`` is a prior classification (its ``type`` or the string
    itself); without one the structure is classified here unless
    ``override`` is set.  The limit only exists in the type II regime.
    """
    config = (config or DEFAULT_CONFIG).with_rmax(r_max)
    if not 0.0 < r_min < r_max:
        raise DomainError("need 0 < r_min < r_max")
    ladder = [float(a) for a in alpha_ladder]
    if len(ladder) < 2 or any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise DomainError("alpha_ladder must be increasing with at least two members")
    if not override:
        if structure is None:
            from .stability import classify_structure

            structure = classify_structure(spec, N, config=config.with_rmax(1e3))
        kind = getattr(structure, "type", structure)
        if kind != "II":
            raise PreconditionError(f"singular limit needs a type II structure, got {kind}")

    def solve(a):
        return solve_ivp(spec, N, a, config)

    def pair(k):
        return solve_pair(spec, N, ladder[k], ladder[k + 1], config)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            profiles = list(pool.map(solve, ladder))
            pairs = list(pool.map(pair, range(len(ladder) - 1)))
    else:
        profiles = [solve(a) for a in ladder]
        pairs = [pair(k) for k in range(len(ladder) - 1)]
    for prof in profiles:
        if prof.first_zero is not None:
            raise ConsistencyError(f"profile alpha={prof.alpha:g} vanishes at r={prof.first_zero:.6g}; no positive limit")

    r = _log_grid(r_min, r_max, per_decade)
    ordering = []
    for k, pr in enumerate(pairs):
        crossings = pr.crossings()
        sel = (pr.r >= r_min) & (pr.r <= r_max)
        gap = pr.w[sel] / np.abs(pr.v[sel])
        row = {"alpha_low": ladder[k], "alpha_high": ladder[k + 1], "min_gap_rel": float(gap.min()), "crossings": crossings}
        ordering.append(row)
        if crossings:
            raise ConsistencyError(
                f"ladder members {ladder[k]:g} and {ladder[k + 1]:g} cross at r={crossings[0]:.6g}; the structure is not type II"
            )
        if gap.min() < -config.event_tol:
            raise ConsistencyError(f"ladder not increasing between {ladder[k]:g} and {ladder[k + 1]:g}")

    values = [p.evaluate(r)[0] for p in profiles]
    step_defects = [float(np.max(np.abs(b - a) / b)) for a, b in zip(values, values[1:])]
    defects = np.abs(values[-1] - values[-2]) / values[-1]
    inner = r[r >= 2.0 * r_min]
    residual_max = float(np.max(profiles[-1].residual(inner)))
    decay = _decay_fit(r, values[-1], r_min)
    log.info("singular ladder defects %s", ", ".join(f"{d:.3g}" for d in step_defects))
    return SingularProfile(spec, N, ladder, profiles, r, defects, step_defects, ordering, decay, residual_max)


def singular_hardy_check(profile, spec=None, N=None):
    """Smallest margin ``(N-2)^2/4 - r^2 f'(u*)`` over the covered range.

    A nonnegative margin together with Hardy's inequality gives the
    quadratic-form stability inequality for test functions supported in the
    covered annulus; a negative margin does not disprove it.
    """
    spec = spec or profile.nonlinearity
    N = profile.N if N is None else N
    return float(np.min(hardy_margin(profile.r, profile.u, spec, N)))


def verify_decay_bounds(profile, spec=None, exponents=None, fit_tol=0.05, u_large=None, rtol=1e-9):
    """Near-origin decay and large-u bound on F for the singular profile.

    The large-u condition ``f'(u) F(u) <= q_S`` is checked by sampling; from
    the first sample u0 onward ``f F^{q_S}`` is nonincreasing, which
    integrates to an explicit upper bound on F that is checked at every
    sample.
    """
    spec = spec or profile.nonlinearity
    N = profile.N
    exponents = exponents or critical_exponents(N)
    qS = exponents.q_S
    if u_large is None:
        top = math.log10(min(spec.u_cap, 1e10))
        u_large = np.logspace(2.0, top, int(round((top - 2.0) * 4)) + 1)
    u_large = np.asarray(u_large, dtype=float)
    q = spec.q_of(u_large)
    bad = np.flatnonzero(q > qS * (1.0 + rtol))
    if bad.size:
        i = bad[-1]
        raise HypothesisError(f"f'F = {q[i]:.9g} exceeds q_S = {qS:.9g} at u = {u_large[i]:.6g}")
    u0 = float(u_large[0])
    F0 = float(spec.F(u0))
    f0 = float(spec.f_vec(np.array([u0]))[0][0])
    C = f0 * F0**qS
    Fu = spec.F(u_large)
    bound = (F0 ** (1.0 - qS) + (qS - 1.0) * (u_large - u0) / C) ** (-1.0 / (qS - 1.0))
    integrated_ok = bool(np.all(Fu <= bound * (1.0 + rtol)))
    # power form: u - u0 >= u/2 past 2 u0
    K = (2.0 * C / (qS - 1.0)) ** (1.0 / (qS - 1.0))
    far = u_large >= 2.0 * u0
    power_ratio = Fu[far] * u_large[far] ** (4.0 / (N - 2.0)) / K
    decay_floor = -(N - 2.0) / 2.0 - fit_tol
    # r^{N-1} f'(u*) is integrable at 0 when the fitted power beats -N (heuristic)
    sel = profile.r <= 10.0 * profile.r_lo * (1 + 1e-12)
    gamma = float(np.polyfit(np.log(profile.r[sel]), np.log(spec.f_vec(profile.u[sel])[1]), 1)[0])
    F_margin = float(np.min(spec.F(profile.u) - profile.r**2 / (2.0 * N)))
    return {
        "q_S": qS,
        "q_max_large_u": float(q.max()),
        "u0": u0,
        "C": C,
        "power_constant": K,
        "F_bound_integrated_ok": integrated_ok,
        "F_power_ratio_max": float(power_ratio.max()) if power_ratio.size else None,
        "F_bound_power_ok": bool(np.all(power_ratio <= 1.0 + rtol)),
        "decay_exponent": profile.decay_exponent,
        "decay_floor": decay_floor,
        "decay_ok": profile.decay_exponent >= decay_floor,
        "F_lower_margin": F_margin,
        "F_lower_ok": F_margin >= -1e-9,
        "fprime_exponent": gamma,
        "integrability_heuristic": bool(N - 1.0 + gamma > -1.0),
    }
