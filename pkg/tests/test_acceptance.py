"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or directly as a script.
"""

import math
import sys
import time

import numpy as np
import pytest

import radstab as rs
from radstab.radial_ode import DEFAULT_CONFIG, SolverConfig
from radstab.scaling import count_model_intersections, gradient_invariant, lambda_of_alpha
from radstab.stability import STABLE, UNSTABLE

RESULTS = {}


def _report(k, checks, elapsed, limit):
    """Print the criterion line and return the failing check names."""
    failing = [name for name, ok in checks if not ok]
    if elapsed > limit:
        failing.append(f"runtime {elapsed:.1f}s > {limit:g}s")
    status = "PASS" if not failing else "FAIL"
    detail = f"{len(checks)} checks, {elapsed:.1f}s"
    if failing:
        detail += "; failing: " + "; ".join(failing)
    line = f"CRITERION {k}: {status} ({detail})"
    RESULTS[k] = line
    return line, failing


def _emit(capsys, line):
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)


# 1 --------------------------------------------------------------------------------------


def criterion_1():
    t = time.perf_counter()
    checks = []
    for N in range(11, 16):
        ce = rs.critical_exponents(N)
        root = math.sqrt(N - 1)
        checks.append((f"p_JL N={N}", abs(ce.p_JL - (1 + 4 / (N - 4 - 2 * root))) <= 1e-12))
        checks.append((f"q_JL N={N}", abs(ce.q_JL - (N - 2 * root) / 4) <= 1e-12))
        checks.append((f"gate equality at q_JL N={N}", abs(rs.hardy_gate(ce.q_JL, N)) <= 1e-10))
        below = np.linspace(1.0, ce.q_JL, 50)[:-1]
        checks.append((f"gate strict below q_JL N={N}", all(rs.hardy_gate(q, N) < 0 for q in below)))
    return _report(1, checks, time.perf_counter() - t, 1.0)


# 2 --------------------------------------------------------------------------------------


def criterion_2():
    t = time.perf_counter()
    spec, N, alphas = rs.power(5.0), 12, [0.5, 1.0, 2.0, 4.0]
    checks = []
    order = rs.ordered_family_check(spec, N, alphas, 1e3)
    checks.append(("(a) no intersections up to r=1e3", order["ordered"]))
    for a in alphas:
        for b in alphas:
            if a < b:
                pair = rs.solve_pair(spec, N, a, b, DEFAULT_CONFIG)
                checks.append((f"(a) pair {a:g},{b:g} uncrossed", not pair.crossings() and pair.w[1:].min() > 0))
    hyp = rs.BarrierHypotheses(1.25, 1.25)
    for a in alphas:
        checks.append((f"(b) barrier alpha={a:g}", rs.barrier_certificate(spec, N, hyp, a).kind == STABLE))
    bounds = rs.verify_model_bounds(rs.power_model(5.0), N, alphas)
    for row in bounds.rows:
        checks.append((f"(c) w<W sigma={row['sigma']:g}", row["gap_min_rel"] > 0))
        checks.append((f"(c) G(w)>r^2/(2N-4q1) sigma={row['sigma']:g}", row["G_margin_min_rel"] > 0))
    for a in alphas:
        prof = rs.solve_ivp(spec, N, a)
        checks.append((f"(d) F(u)>=r^2/(2N) alpha={a:g}", rs.verify_F_lower_bound(prof) >= -1e-9))
    return _report(2, checks, time.perf_counter() - t, 60.0)


# 3 --------------------------------------------------------------------------------------


def criterion_3():
    t = time.perf_counter()
    spec, N = rs.power(2.0), 12
    checks = []
    for a in (0.1, 1.0, 10.0):
        v = rs.unstable_by_intersection(spec, N, a)
        ok = v.kind == UNSTABLE and v.witness["u_at_cross"] > 0
        checks.append((f"Unstable alpha={a:g}", ok))
    checks.append(("model p=2 count >= 3 by 1e3", count_model_intersections(rs.power_model(2.0), N, 1.0, 0.5, 1e3) >= 3))
    p_S = rs.critical_exponents(N).p_S
    checks.append(("model p=p_S count == 1", count_model_intersections(rs.power_model(p_S), N, 1.0, 0.5, 1e3) == 1))
    return _report(3, checks, time.perf_counter() - t, 60.0)


# 4 --------------------------------------------------------------------------------------


def criterion_4():
    t = time.perf_counter()
    q1, q2, N = 1.2, 1.3, 12
    spec = rs.power_sum_from_q(q1, q2)
    u = np.logspace(-6, 6, 200)
    curv = spec.curvature_ratio(u)
    qf = spec.q_of(u)
    checks = [
        (f"curvature sandwich lower (min {curv.min():.6f} vs q1={q1})", curv.min() >= q1),
        ("curvature sandwich upper", curv.max() <= q2 * (1 + 1e-12)),
        (f"q1 <= f'F (min {qf.min():.6f})", qf.min() >= q1 * (1 - 1e-9)),
        ("f'F <= q2", qf.max() <= q2 * (1 + 1e-9)),
        ("classify -> II", rs.classify_structure(spec, N).type == "II"),
    ]
    return _report(4, checks, time.perf_counter() - t, 120.0)


# 5 --------------------------------------------------------------------------------------


def criterion_5():
    t = time.perf_counter()
    spec, N = rs.power_rational(5.0, 3.0), 12
    lim = rs.estimate_limits(spec)
    res = rs.classify_structure(spec, N)
    checks = [
        ("q0 = 1.25 +- 1e-3", lim.q0 is not None and abs(lim.q0 - 1.25) <= 1e-3),
        ("q_inf = 2 +- 1e-3", lim.q_inf is not None and abs(lim.q_inf - 2.0) <= 1e-3),
        ("Type III", res.type == "III"),
    ]
    if res.type == "III":
        lo, hi = res.bracket
        at = {v.alpha: v for v in res.evidence}
        checks += [
            ("bracket rel width <= 1e-2", (hi - lo) / lo <= 1e-2),
            ("stable-side evidence below", at[lo].stable_side),
            ("Unstable witness above", at[hi].unstable and at[hi].witness is not None),
        ]
    return _report(5, checks, time.perf_counter() - t, 300.0)


# 6 --------------------------------------------------------------------------------------


def criterion_6():
    t = time.perf_counter()
    checks = []
    cfg = SolverConfig(r_max=50.0)
    cases = [
        (rs.power_rational(5.0, 3.0), rs.power_model(2.0), 1.0),
        (rs.power_rational(5.0, 3.0), rs.power_model(2.0), 100.0),
        (rs.power_sum_from_q(1.2, 1.3), rs.exponential_model(), 1.0),
        (rs.power_sum_from_q(1.2, 1.3), rs.power_model(3.0), 0.01),
    ]
    for spec, model, alpha in cases:
        prof = rs.solve_ivp(spec, 12, alpha, cfg)
        lam = lambda_of_alpha(spec, model, alpha)
        v = rs.push_forward(spec, prof, model, lam)
        back = rs.pull_back(spec, v, lam, model)
        ref = prof.evaluate(back.r)[0]
        rt = np.max(np.abs(back.u - ref) / ref)
        checks.append((f"round trip {spec} / {model} alpha={alpha:g} ({rt:.1e})", rt <= 1e-8))
        iu = gradient_invariant(spec, prof)[1:]
        iv = gradient_invariant(model, v)[1:]
        inv = np.max(np.abs(iv - iu) / np.abs(iu))
        checks.append((f"invariant {spec} / {model} ({inv:.1e})", inv <= 1e-7))
    spec = rs.power(3.0)
    prof = rs.solve_ivp(spec, 12, 1.0, SolverConfig(r_max=100.0))
    for lam in (0.5, 2.0):
        v = rs.push_forward(spec, prof, rs.power_model(3.0), lam)
        expected = lam * prof.evaluate(lam * v.r)[0]
        err = np.max(np.abs(v.u - expected) / expected)
        checks.append((f"classical scaling lambda={lam:g} ({err:.1e})", err <= 1e-6))
    return _report(6, checks, time.perf_counter() - t, 30.0)


# 7 --------------------------------------------------------------------------------------


def criterion_7():
    t = time.perf_counter()
    model = rs.power_model(2.0)
    a = rs.convergence_study(rs.power_rational(5.0, 3.0), 12, model, 1.0, [1e1, 1e2, 1e3, 1e4])
    b = rs.convergence_study(rs.power_sum_from_q(1.2, 1.3), 12, model, 1.0, [1e-1, 1e-2, 1e-3, 1e-4])
    checks = [
        (f"power rational sup-errors decreasing {a.errors}", a.strictly_decreasing),
        (f"power sum sup-errors decreasing {b.errors}", b.strictly_decreasing),
    ]
    return _report(7, checks, time.perf_counter() - t, 300.0)


# 8 --------------------------------------------------------------------------------------


def criterion_8():
    t = time.perf_counter()
    sp = rs.approximate_singular(rs.power(5.0), 12, alpha_ladder=[1e1, 1e2, 1e3, 1e4, 1e5, 1e6], override=True)
    W = rs.model_reference(rs.power_model(5.0), 12)
    r = np.linspace(1.0, 10.0, 400)
    top = np.max(np.abs(sp.evaluate(r)[0] / W(r) - 1.0))
    margin = rs.singular_hardy_check(sp)
    checks = [
        ("ladder pointwise increasing", all(row["min_gap_rel"] > 0 for row in sp.ordering)),
        (f"top within 1% of W on [1,10] ({top:.1e})", top <= 1e-2),
        (f"Hardy margin 1.25 ({margin:.12g})", abs(margin - 1.25) <= 1e-6),
    ]
    return _report(8, checks, time.perf_counter() - t, 60.0)


# 9 --------------------------------------------------------------------------------------


def _quantities(cfg):
    out = {}
    out["first_zero N=3 p=2"] = rs.solve_ivp(rs.power(2.0), 3, 1.0, cfg).first_zero
    out["first_zero N=12 p=1.2"] = rs.solve_ivp(rs.power(1.2), 12, 1.0, cfg).first_zero
    cr = rs.solve_pair(rs.power(2.0), 12, 1.0, 0.5, cfg).crossings()
    for i, c in enumerate(cr):
        out[f"crossing {i} p=2"] = c
    study = rs.convergence_study(rs.power_rational(5.0, 3.0), 12, rs.power_model(2.0), 1.0, [1e1, 1e2, 1e3, 1e4], config=cfg)
    for a, e in zip(study.alphas, study.errors):
        out[f"sup-error alpha={a:g}"] = e
    res = rs.classify_structure(rs.power_rational(5.0, 3.0), 12, cfg)
    out["alpha*"] = res.alpha_star
    return out, res


def criterion_9():
    t = time.perf_counter()
    base = DEFAULT_CONFIG
    a, res = _quantities(base)
    b, _ = _quantities(base.tightened(0.5))
    checks = []
    for key in a:
        if key not in b:
            checks.append((f"{key} present after halving", False))
            continue
        if key == "alpha*":
            tol = 1e-3 * a[key]  # bisection tolerance
        elif key.startswith("sup-error"):
            tol = base.rtol  # errors are absolute on an O(1) profile
        else:
            tol = base.rtol * a[key]
        moved = abs(a[key] - b[key])
        checks.append((f"{key} moved {moved:.1e} (limit {10 * tol:.1e})", moved < 10 * tol))
    profiles = [rs.solve_ivp(rs.power(p), N, al) for p, N, al in ((2.0, 3, 1.0), (1.2, 12, 1.0), (5.0, 12, 1.0), (2.0, 12, 1.0))]
    profiles += [rs.solve_ivp(rs.power_rational(5.0, 3.0), 12, al) for al in (0.1, 1.0, 10.0)]
    profiles += [rs.solve_ivp(rs.power_sum_from_q(1.2, 1.3), 12, al) for al in (0.01, 1.0, 100.0)]
    for prof in profiles:
        d = rs.verify_mass_identity(prof)
        checks.append((f"mass defect {prof.nonlinearity} alpha={prof.alpha:g} ({d:.1e})", d <= 1e-6))
    return _report(9, checks, time.perf_counter() - t, 600.0)


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9}


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k, capsys):
    line, failing = CRITERIA[k]()
    _emit(capsys, line)
    assert not failing, line


if __name__ == "__main__":
    bad = 0
    for k in sorted(CRITERIA):
        line, failing = CRITERIA[k]()
        print(line, flush=True)
        bad += bool(failing)
    sys.exit(1 if bad else 0)
