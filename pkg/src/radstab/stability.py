"""Stability verdicts for radial solutions and the global structure type.

Evidence is deliberately asymmetric:

* ``Unstable`` needs a witness: a smaller initial value beta whose profile
  stays positive and below u(., alpha) until the two meet.  That
  configuration forces instability.
* ``StableCertified`` needs a barrier: a supersolution v-hat above
  u(., alpha) with ``r^2 f'(v-hat) <= (N-2)^2/4``, which Hardy's inequality
  turns into stability.
* ``OrderedUpTo`` records that nearby profiles stayed ordered on [0, R].  It
  is evidence, never proof.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConsistencyError, DomainError, HypothesisError, PreconditionError
from .nonlinearity import check_hypotheses, critical_exponents, estimate_limits
from .radial_ode import DEFAULT_CONFIG, solve_ivp, solve_pair, start_radius
from .scaling import model_from_q

log = logging.getLogger(__name__)

UNSTABLE = "Unstable"
STABLE = "StableCertified"
ORDERED = "OrderedUpTo"
INCONCLUSIVE = "Inconclusive"

DELTAS = (0.5, 0.1, 0.01)


@dataclass(frozen=True)
class StabilityVerdict:
    kind: str
    alpha: float
    mechanism: Optional[str] = None
    witness: Optional[dict] = None
    R: Optional[float] = None
    reason: Optional[str] = None
    details: dict = field(default_factory=dict)

    @property
    def unstable(self):
        return self.kind == UNSTABLE

    @property
    def stable_side(self):
        return self.kind in (STABLE, ORDERED)

    def to_dict(self):
        out = {"alpha": self.alpha, "verdict": self.kind}
        for key in ("mechanism", "witness", "R", "reason"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        if self.details:
            out["details"] = self.details
        return out


# -- the intersection route ---------------------------------------------------------


def intersection_test(profile_a, profile_b):
    """Crossing radii of two profiles with both positive there.

    The difference is re-integrated as its own unknown (the stored profiles
    only resolve it to their absolute tolerance), up to the shorter of the
    two ranges.
    """
    if profile_a.N != profile_b.N or profile_a.nonlinearity is not profile_b.nonlinearity:
        raise DomainError("profiles must share N and nonlinearity")
    if profile_a.alpha == profile_b.alpha:
        raise DomainError("identical initial values have no intersections to test")
    r_end = min(profile_a.r_hi, profile_b.r_hi)
    cfg = profile_a.config.with_rmax(r_end)
    pair = solve_pair(profile_a.nonlinearity, profile_a.N, profile_a.alpha, profile_b.alpha, cfg)
    return pair.crossings()


def _probe(spec, N, alpha, beta, config):
    pair = solve_pair(spec, N, alpha, beta, config, stop_after_crossing=True)
    crossings = pair.crossings()
    if crossings:
        return crossings[0], pair
    return None, pair


def unstable_by_intersection(spec, N, alpha, config=None, deltas=DELTAS):
    """Look for a lower profile overtaking u(., alpha) while both are positive.

    Tries ``beta = alpha (1 - delta)`` along ``deltas``; the first resolved
    crossing is the witness.  A finite first zero of u(., alpha) guarantees
    such a crossing inside it, which is recorded in the witness.
    """
    config = config or DEFAULT_CONFIG
    reach = config.r_max
    for delta in deltas:
        beta = alpha * (1.0 - delta)
        rc, pair = _probe(spec, N, alpha, beta, config)
        if rc is not None:
            u_a, gap = pair.evaluate(rc)
            witness = {
                "alpha": float(alpha),
                "beta": float(beta),
                "delta": float(delta),
                "r_cross": float(rc),
                "u_at_cross": float(u_a),
                "first_zero": pair.first_zero if pair.first_zero is not None and pair.first_zero > rc else None,
            }
            return StabilityVerdict(UNSTABLE, float(alpha), mechanism="intersection", witness=witness)
        reach = min(reach, pair.r_hi)
    return StabilityVerdict(ORDERED, float(alpha), mechanism="intersection", R=float(reach))


# -- the barrier route ------------------------------------------------------------------


@dataclass(frozen=True)
class BarrierHypotheses:
    """Band ``q1 <= f'F <= q2`` on ``(0, ell)`` plus the Hardy-type gate on (q1, q2)."""

    q1: float
    q2: float
    ell: float = math.inf

    def gate_value(self, N):
        return self.q2 * (2.0 * N - 4.0 * self.q1) - (N - 2.0) ** 2 / 4.0

    def gate_holds(self, N):
        # exact rational arithmetic on the binary values
        q1, q2 = Fraction(self.q1), Fraction(self.q2)
        return q2 * (2 * N - 4 * q1) <= Fraction((N - 2) ** 2, 4)

    def validate(self, N):
        ce = critical_exponents(N)
        if N < 11:
            raise HypothesisError(f"barrier certificates need N >= 11, got N={N}")
        if not self.q1 <= self.q2:
            raise HypothesisError(f"need q1 <= q2, got {self.q1}, {self.q2}")
        if not (1.0 <= self.q1 <= ce.q_JL * (1.0 + 1e-12)):
            raise HypothesisError(f"need 1 <= q1 <= q_JL={ce.q_JL:.12g}, got q1={self.q1}")
        if not self.ell > 0.0:
            raise HypothesisError("need ell > 0")
        if not self.gate_holds(N):
            raise HypothesisError(
                f"q2 (2N - 4 q1) = {self.q2 * (2 * N - 4 * self.q1):.12g} exceeds (N-2)^2/4 = {(N - 2) ** 2 / 4:g}"
            )

    def to_dict(self):
        return {"q1": self.q1, "q2": self.q2, "ell": self.ell, "ell_finite": math.isfinite(self.ell)}


def _band_grid(spec, upper, per_decade):
    lo = math.log10(spec.domain_floor)
    hi = math.log10(min(upper, spec.u_cap))
    n = max(2, int(math.ceil((hi - lo) * per_decade)) + 1)
    return np.logspace(lo, hi, n)


def check_q_band(spec, hyp, per_decade=20, rtol=1e-9):
    """Raise HypothesisError at the first sampled u with f'F outside [q1, q2]."""
    u = _band_grid(spec, hyp.ell, per_decade)
    if math.isfinite(hyp.ell):
        u = u[u < hyp.ell]
    q = spec.q_of(u)
    bad = np.flatnonzero((q < hyp.q1 * (1.0 - rtol)) | (q > hyp.q2 * (1.0 + rtol)))
    if bad.size:
        i = bad[0]
        raise HypothesisError(f"band q1={hyp.q1:.9g} <= f'F <= q2={hyp.q2:.9g} fails at u={u[i]:.6g} (f'F={q[i]:.9g})")


def _refine_extreme(spec, u, q, i, sign):
    # sampled extremes can sit a few 1e-5 inside the true ones; polish in log u
    lo = math.log(u[max(i - 1, 0)])
    hi = math.log(u[min(i + 1, u.size - 1)])
    if hi <= lo:
        return float(q[i])
    res = minimize_scalar(lambda t: sign * float(spec.q_of(np.array([math.exp(t)]))[0]), bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    return min(float(q[i]), sign * res.fun) if sign > 0 else max(float(q[i]), sign * res.fun)


def _fit_once(spec, N, u, q, eps):
    ce = critical_exponents(N)
    lo_run = np.minimum.accumulate(q)
    hi_run = np.maximum.accumulate(q)
    q1s = np.maximum(1.0, (1.0 - eps) * lo_run)
    q2s = (1.0 + eps) * hi_run
    ok = (q2s * (2.0 * N - 4.0 * q1s) <= (N - 2.0) ** 2 / 4.0) & (q1s <= ce.q_JL)
    if not ok[0]:
        return None
    fail = np.flatnonzero(~ok)
    k = fail[0] if fail.size else u.size
    seg_u, seg_q = u[:k], q[:k]
    q1 = float(max(1.0, (1.0 - eps) * _refine_extreme(spec, seg_u, seg_q, int(np.argmin(seg_q)), 1.0)))
    q2 = float((1.0 + eps) * _refine_extreme(spec, seg_u, seg_q, int(np.argmax(seg_q)), -1.0))
    if fail.size:
        hyp = BarrierHypotheses(q1, q2, float(u[k]))
    else:
        lim = estimate_limits(spec)
        ell = math.inf if lim.q_inf is not None and q1 < lim.q_inf < q2 else float(u[-1])
        hyp = BarrierHypotheses(q1, q2, ell)
    if not hyp.gate_holds(N) or hyp.q1 > ce.q_JL:
        return None
    return hyp


def fit_hypotheses(spec, N, eps=(1e-3, 1e-4, 1e-5, 1e-6), per_decade=20):
    """Widest-range band (q1, q2, ell) passing the gate, from sampled f'F.

    Scanning u upward from the domain floor, q1 and q2 are the running
    extremes widened by a relative margin; ell is the first sample where the
    widened band fails the gate.  ell is infinite only when the band survives
    the whole grid and f'F has a determined limit at infinity inside it.
    Among the margins in ``eps`` the largest one whose ell is within a factor
    two of the best reach wins.  Returns None when no admissible band starts
    at the floor.
    """
    if N < 11:
        return None
    u = _band_grid(spec, math.inf, per_decade)
    q = spec.q_of(u)
    fits = [(e, _fit_once(spec, N, u, q, e)) for e in np.atleast_1d(eps)]
    fits = [(e, h) for e, h in fits if h is not None]
    if not fits:
        return None
    best = max(h.ell for _, h in fits)
    for e, h in sorted(fits, key=lambda t: -t[0]):
        if h.ell >= 0.5 * best:
            return h


def _same_as_model(spec, model):
    return model.kind == "power" and getattr(spec, "family", None) == "power" and spec.params[0] == model.p


def barrier_certificate(spec, N, hyp, alpha, config=None, tol=1e-9, per_decade=64, check_band=True):
    """Certify stability of u(., alpha) through the barrier ``F^{-1}(G(w(., alpha0)))``.

    The hypotheses are checked first (gate and sampled band); a failure
    there raises.  A failing pointwise check afterwards only yields
    ``Inconclusive``.
    """
    config = config or DEFAULT_CONFIG
    hyp.validate(N)
    if not alpha < hyp.ell:
        raise PreconditionError(f"alpha={alpha:g} must lie below ell={hyp.ell:g}")
    if check_band:
        check_q_band(spec, hyp)
    model = model_from_q(hyp.q1)
    target = 2.0 * alpha if not math.isfinite(hyp.ell) else min(2.0 * alpha, math.sqrt(alpha * hyp.ell))
    alpha0 = float(model.G_inv(spec.F(target)))
    w = solve_ivp(model, N, alpha0, config)
    if w.first_zero is not None:
        return StabilityVerdict(INCONCLUSIVE, float(alpha), mechanism="barrier", reason=f"model profile vanishes at r={w.first_zero:.6g}")
    u = solve_ivp(spec, N, alpha, config)
    if u.first_zero is not None:
        return StabilityVerdict(INCONCLUSIVE, float(alpha), mechanism="barrier", reason=f"u vanishes at r={u.first_zero:.6g}")

    r_lo = start_radius(float(spec.fev(spec.kparams, target)[1]))
    n = int(math.ceil(math.log10(config.r_max / r_lo) * per_decade)) + 1
    r = np.concatenate(([0.0], np.logspace(math.log10(r_lo), math.log10(config.r_max), n)))
    wv = w.evaluate(r)[0]
    vhat = spec.invert_F(model.G(wv))
    hardy = (N - 2.0) ** 2 / 4.0
    ratio = r * r * spec.f_vec(vhat)[1] / hardy
    details = {
        "model": str(model),
        "alpha0": alpha0,
        "vhat0": float(vhat[0]),
        "target": target,
        "hardy_ratio_max": float(np.max(ratio)),
        "grid_points": int(r.size),
        "r_max": float(config.r_max),
    }
    if abs(vhat[0] - target) > 1e-8 * target or np.any(np.diff(vhat) > 1e-12 * vhat[:-1]):
        return StabilityVerdict(INCONCLUSIVE, float(alpha), mechanism="barrier", reason="barrier not anchored or not decreasing", details=details)
    if np.max(ratio) > 1.0 + tol:
        i = int(np.argmax(ratio))
        return StabilityVerdict(
            INCONCLUSIVE, float(alpha), mechanism="barrier", reason=f"r^2 f'(vhat) exceeds (N-2)^2/4 at r={r[i]:.6g}", details=details
        )

    if _same_as_model(spec, model):
        # vhat is then u(., target) itself; compare through the gap integrator
        pair = solve_pair(spec, N, alpha, target, config)
        rel = pair.w / pair.v
        gap_rel = float(np.min(rel[1:]))
        resolved = gap_rel > 0.0 and not pair.crossings()
    else:
        uv = u.evaluate(r)[0]
        rel = (vhat - uv) / vhat
        gap_rel = float(np.min(rel))
        resolved = gap_rel > 100.0 * config.rtol
    details["order_gap_min_rel"] = gap_rel
    if not resolved or not np.all(u.u > 0.0):
        return StabilityVerdict(
            INCONCLUSIVE, float(alpha), mechanism="barrier", reason="ordering 0 < u < vhat not resolved", details=details
        )
    return StabilityVerdict(STABLE, float(alpha), mechanism="barrier", R=float(config.r_max), details=details)


# -- limits and structure ----------------------------------------------------------------


@dataclass(frozen=True)
class Prediction:
    types: Optional[tuple]
    reason: str

    def allows(self, t):
        return self.types is None or t in self.types

    def to_dict(self):
        return {"types": list(self.types) if self.types is not None else None, "reason": self.reason}


def criteria_from_limits(limits, exponents):
    """Which structure types the limits q0, q_inf permit."""
    if exponents.q_JL is None:
        return Prediction(("I",), "N <= 10: every stable radial solution is constant")
    qjl = exponents.q_JL
    q0, qi = limits.q0, limits.q_inf
    m0 = max(2.0 * limits.q0_uncertainty, 1e-9)
    mi = max(2.0 * limits.q_inf_uncertainty, 1e-9)
    large_unstable = qi is not None and qi > qjl + mi
    if q0 is None:
        if large_unstable:
            return Prediction(("I", "III"), "q_inf > q_JL: large alpha unstable; q0 undetermined")
        return Prediction(None, "q0 undetermined")
    if q0 > qjl + m0:
        return Prediction(("I",), "q0 > q_JL: every alpha unstable")
    if 1.0 + m0 < q0 < qjl - m0:
        if large_unstable:
            return Prediction(("III",), "1 < q0 < q_JL < q_inf")
        return Prediction(("II", "III"), "1 < q0 < q_JL: stable solutions exist")
    if large_unstable:
        return Prediction(("I", "III"), "q_inf > q_JL; q0 on a boundary")
    return Prediction(None, "q0 on a boundary (1 or q_JL) within uncertainty")


@dataclass
class StructureClassification:
    type: str
    evidence: list
    alpha_star: Optional[float] = None
    bracket: Optional[tuple] = None
    prediction: Optional[Prediction] = None
    hypotheses: Optional[BarrierHypotheses] = None
    exponents: Optional[object] = None
    limits: Optional[object] = None
    summary: str = ""

    def to_dict(self):
        out = {
            "type": self.type,
            "evidence": [v.to_dict() for v in self.evidence],
            "summary": self.summary,
        }
        if self.alpha_star is not None:
            out["alpha_star"] = self.alpha_star
            out["alpha_star_bracket"] = list(self.bracket)
        if self.prediction is not None:
            out["prediction"] = self.prediction.to_dict()
        if self.hypotheses is not None:
            out["hypotheses"] = self.hypotheses.to_dict()
        if self.exponents is not None:
            out["exponents"] = self.exponents.to_dict()
        if self.limits is not None:
            out["limits"] = self.limits.to_dict()
        return out


def _verdict_at(spec, N, alpha, hyp, config):
    probe = unstable_by_intersection(spec, N, alpha, config)
    if hyp is None or not alpha < hyp.ell:
        return probe
    cert = barrier_certificate(spec, N, hyp, alpha, config, check_band=False)
    if cert.kind == STABLE and probe.unstable:
        raise ConsistencyError(
            f"alpha={alpha:g}: barrier certifies stability but a crossing at r={probe.witness['r_cross']:.6g} says unstable"
        )
    if cert.kind == STABLE:
        return cert
    if probe.unstable:
        return probe
    return StabilityVerdict(ORDERED, float(alpha), mechanism="intersection", R=probe.R, reason=cert.reason)


def _check_monotone(verdicts):
    stable_alphas = [v.alpha for v in verdicts if v.kind == STABLE]
    if not stable_alphas:
        return
    top = max(stable_alphas)
    bad = [v.alpha for v in verdicts if v.unstable and v.alpha < top]
    if bad:
        raise ConsistencyError(f"Unstable at alpha={min(bad):g} below certified-stable alpha={top:g}")


def classify_structure(
    spec,
    N,
    config=None,
    hyp=None,
    alpha_grid=None,
    bisect_rtol=1e-3,
    threads=1,
    auto_fit=True,
):
    """Type I, II, III (with alpha*) or Undetermined, with the per-alpha evidence."""
    config = config or DEFAULT_CONFIG
    exps = critical_exponents(N)
    if N <= 10:
        return StructureClassification(
            "I", [], prediction=Prediction(("I",), "N <= 10"), exponents=exps, summary="N <= 10: no nonconstant stable radial solution"
        )
    rep = check_hypotheses(spec)
    if not rep.ok:
        raise HypothesisError("; ".join(rep.violations))
    limits = estimate_limits(spec)
    pred = criteria_from_limits(limits, exps)
    if hyp is None and auto_fit and pred.types != ("I",):
        hyp = fit_hypotheses(spec, N)
    if hyp is not None:
        hyp.validate(N)
        check_q_band(spec, hyp)
    grid = np.logspace(-3, 3, 13) if alpha_grid is None else np.asarray(alpha_grid, dtype=float)
    grid = np.sort(grid)

    def one(a):
        return _verdict_at(spec, N, float(a), hyp, config)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            verdicts = list(pool.map(one, grid))
    else:
        verdicts = [one(a) for a in grid]
    verdicts.sort(key=lambda v: v.alpha)
    _check_monotone(verdicts)
    for v in verdicts:
        log.info("alpha=%.6g %s", v.alpha, v.kind)

    certified = any(v.kind == STABLE for v in verdicts)
    if pred.types == ("I",) and certified:
        raise ConsistencyError("limits force type I but a stable certificate was produced")
    unstable = [v for v in verdicts if v.unstable]
    common = dict(prediction=pred, hypotheses=hyp, exponents=exps, limits=limits)

    if len(unstable) == len(verdicts):
        if pred.allows("I"):
            return StructureClassification("I", verdicts, summary="every sampled alpha has an instability witness", **common)
        return StructureClassification("Undetermined", verdicts, summary="all sampled alpha unstable, limits exclude type I", **common)

    if not unstable:
        full = hyp is not None and not math.isfinite(hyp.ell)
        if full and certified and pred.allows("II"):
            return StructureClassification("II", verdicts, summary="band hypotheses hold on (0, inf); barrier certificates on the sweep", **common)
        return StructureClassification("Undetermined", verdicts, summary="no instability found but no global certificate", **common)

    lowest_unstable = min(v.alpha for v in unstable)
    below = [v for v in verdicts if v.alpha < lowest_unstable]
    above_ok = all(v.unstable for v in verdicts if v.alpha >= lowest_unstable)
    if not below or not above_ok or not pred.allows("III"):
        return StructureClassification("Undetermined", verdicts, summary="evidence does not split into a stable then unstable range", **common)

    lo_v = below[-1]
    hi_v = next(v for v in verdicts if v.alpha == lowest_unstable)
    lo, hi = lo_v.alpha, hi_v.alpha
    while hi - lo > bisect_rtol * lo:
        mid = math.sqrt(lo * hi)
        v = _verdict_at(spec, N, mid, hyp, config)
        verdicts.append(v)
        if v.unstable:
            hi, hi_v = mid, v
        else:
            lo, lo_v = mid, v
    verdicts.sort(key=lambda v: v.alpha)
    _check_monotone(verdicts)
    alpha_star = math.sqrt(lo * hi)
    return StructureClassification(
        "III",
        verdicts,
        alpha_star=alpha_star,
        bracket=(lo, hi),
        summary=f"stable-side evidence up to {lo:.6g} ({lo_v.kind}), instability witness from {hi:.6g}",
        **common,
    )


# -- ordering -------------------------------------------------------------------------------


def ordered_family_check(spec, N, alpha_grid, R, config=None):
    """Strict ordering of consecutive profiles on [0, R]."""
    config = (config or DEFAULT_CONFIG).with_rmax(R)
    grid = [float(a) for a in alpha_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise DomainError("alpha grid must be strictly increasing")
    rows = []
    for a, b in zip(grid, grid[1:]):
        pair = solve_pair(spec, N, a, b, config)
        rel = pair.w[1:] / np.abs(pair.v[1:])
        crossings = pair.crossings()
        k = int(np.argmin(rel))
        rows.append(
            {
                "alpha_low": a,
                "alpha_high": b,
                "min_gap_rel": float(rel[k]),
                "r_at_min": float(pair.r[k + 1]),
                "covered_to": float(pair.r_hi),
                "first_violation": crossings[0] if crossings else (float(pair.r[k + 1]) if rel[k] <= 0 else None),
            }
        )
    ordered = all(row["first_violation"] is None and row["min_gap_rel"] > 0 for row in rows)
    return {"ordered": ordered, "R": float(R), "pairs": rows}
