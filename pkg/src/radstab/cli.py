"""Batch front end: ``radstab CONFIG [--out DIR] [--rmax R] [--rtol T] [--atol T] [--threads K]``.

The config is JSON, read from a path or from standard input (``-``).  Logs
go to standard error; standard output carries one JSON summary line.
Artifacts (``report.json``, CSV files, ``summary.txt``) are deterministic.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import io as rio
from .errors import ConsistencyError, DomainError, RadstabError
from .nonlinearity import critical_exponents, estimate_limits, power_sum_from_q, from_config, hardy_gate, power_rational
from .radial_ode import DEFAULT_CONFIG, SolverConfig, solve_ivp, solve_linearized, verify_F_lower_bound, verify_mass_identity
from .scaling import (
    convergence_study,
    exponential_model,
    gradient_invariant,
    lambda_of_alpha,
    power_model,
    pull_back,
    push_forward,
    verify_model_bounds,
)
from .singular import approximate_singular, singular_hardy_check, verify_decay_bounds
from .stability import classify_structure, ordered_family_check, unstable_by_intersection

log = logging.getLogger("radstab")

EXIT_OK = 0
EXIT_INVALID = 1

COMMANDS = ("exponents", "solve", "scan", "classify", "transform", "singular", "verify-examples")

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_POS_LIST = {"type": "array", "items": _POS, "minItems": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["command"],
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "N": {"type": "integer", "minimum": 1},
        "nonlinearity": {
            "type": "object",
            "additionalProperties": False,
            "required": ["family"],
            "properties": {
                "family": {"enum": ["power", "power_sum", "power_rational"]},
                "p": _NUM,
                "p1": _NUM,
                "p2": _NUM,
                "domain_floor": _POS,
                "u_cap": _POS,
            },
        },
        "alpha": _POS,
        "alpha_grid": _POS_LIST,
        "alpha_ladder": _POS_LIST,
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {"kind": {"enum": ["power", "exponential"]}, "p": {"type": "number", "exclusiveMinimum": 1}},
        },
        "lambda": _POS,
        "sigma": _NUM,
        "sigma_grid": {"type": "array", "items": _NUM, "minItems": 1},
        "S": _POS,
        "r_min": _POS,
        "r_max": _POS,
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"rtol": _POS, "atol": _POS, "event_tol": _POS},
        },
        "override": {"type": "boolean"},
        "threads": {"type": "integer", "minimum": 1},
        "out": {"type": "string"},
    },
}

_NEEDS = {
    "solve": ("N", "nonlinearity", "alpha"),
    "scan": ("N", "nonlinearity", "alpha_grid"),
    "classify": ("N", "nonlinearity"),
    "transform": ("N", "nonlinearity", "model"),
    "singular": ("N", "nonlinearity"),
    "exponents": ("N",),
    "verify-examples": (),
}


class ConfigError(Exception):
    pass


def validate(cfg):
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    missing = [k for k in _NEEDS[cfg["command"]] if k not in cfg]
    if missing:
        raise ConfigError(f"command {cfg['command']!r} needs {', '.join(missing)}")


def solver_config(cfg):
    tol = cfg.get("tolerances", {})
    return SolverConfig(
        rtol=tol.get("rtol", DEFAULT_CONFIG.rtol),
        atol=tol.get("atol", DEFAULT_CONFIG.atol),
        event_tol=tol.get("event_tol", DEFAULT_CONFIG.event_tol),
        r_max=cfg.get("r_max", DEFAULT_CONFIG.r_max),
    )


def _spec(cfg):
    try:
        return from_config(cfg["nonlinearity"])
    except KeyError as exc:
        raise ConfigError(f"nonlinearity: missing parameter {exc.args[0]!r}") from None
    except DomainError as exc:
        raise ConfigError(f"nonlinearity: {exc}") from None


def _model(cfg):
    m = cfg["model"]
    if m["kind"] == "exponential":
        return exponential_model()
    if "p" not in m:
        raise ConfigError("model of kind 'power' needs p")
    try:
        return power_model(m["p"])
    except DomainError as exc:
        raise ConfigError(f"model: {exc}") from None


# -- commands -----------------------------------------------------------------------------
# each returns (report dict, summary lines) and writes its CSV files into out


def cmd_exponents(cfg, sc, out, pool):
    N = cfg["N"]
    ce = critical_exponents(N)
    rep = {"exponents": ce.to_dict()}
    lines = [f"N = {N}", f"p_S = {ce.p_S:.17g}", f"q_S = {ce.q_S:.17g}"]
    if ce.q_JL is not None:
        rep["hardy_gate_at_q_JL"] = hardy_gate(ce.q_JL, N)
        lines += [f"p_JL = {ce.p_JL:.17g}", f"q_JL = {ce.q_JL:.17g}"]
    else:
        lines.append("p_JL = infinity (N <= 10)")
    return rep, lines


def cmd_solve(cfg, sc, out, pool):
    spec = _spec(cfg)
    N, alpha = cfg["N"], cfg["alpha"]
    prof = solve_ivp(spec, N, alpha, sc)
    lin = solve_linearized(spec, prof, sc)
    prof.to_csv(out / "profile.csv")
    lin.to_csv(out / "linearized.csv")
    rep = {
        "profile": prof.to_dict(),
        "mass_defect": verify_mass_identity(prof),
        "linearized_zeros": list(lin.zeros),
    }
    if prof.first_zero is None:
        rep["F_lower_margin"] = verify_F_lower_bound(prof)
    fz = "none" if prof.first_zero is None else f"{prof.first_zero:.12g}"
    return rep, [f"alpha = {alpha:g}", f"first zero: {fz}", f"linearized zeros: {len(lin.zeros)}"]


def cmd_scan(cfg, sc, out, pool):
    spec = _spec(cfg)
    N = cfg["N"]
    grid = sorted(cfg["alpha_grid"])

    def one(a):
        prof = solve_ivp(spec, N, a, sc)
        verdict = unstable_by_intersection(spec, N, a, sc)
        return prof, verdict

    rows = list(pool.map(one, grid)) if pool else [one(a) for a in grid]
    zeros = [math.nan if p.first_zero is None else p.first_zero for p, _ in rows]
    unstable = [1.0 if v.unstable else 0.0 for _, v in rows]
    rio.write_csv(out / "scan.csv", ["alpha", "first_zero", "unstable"], [grid, zeros, unstable])
    rep = {"scan": [dict(v.to_dict(), first_zero=p.first_zero) for p, v in rows]}
    if len(grid) > 1:
        rep["ordering"] = ordered_family_check(spec, N, grid, sc.r_max, sc)
    lines = [f"alpha={v.alpha:g}: {v.kind}" for _, v in rows]
    return rep, lines


def cmd_classify(cfg, sc, out, pool):
    spec = _spec(cfg)
    res = classify_structure(spec, cfg["N"], sc, alpha_grid=cfg.get("alpha_grid"), threads=cfg.get("threads", 1))
    ev = res.evidence
    rio.write_csv(
        out / "evidence.csv",
        ["alpha", "unstable", "certified", "r_cross"],
        [
            [v.alpha for v in ev],
            [1.0 if v.unstable else 0.0 for v in ev],
            [1.0 if v.kind == "StableCertified" else 0.0 for v in ev],
            [v.witness["r_cross"] if v.witness else math.nan for v in ev],
        ],
    )
    lines = [f"type {res.type}", res.summary]
    if res.alpha_star is not None:
        lines.append(f"alpha* in [{res.bracket[0]:.9g}, {res.bracket[1]:.9g}]")
    return {"classification": res.to_dict()}, lines


def cmd_transform(cfg, sc, out, pool):
    spec = _spec(cfg)
    model = _model(cfg)
    N = cfg["N"]
    rep, lines = {}, []
    if "alpha" in cfg:
        alpha = cfg["alpha"]
        lam = cfg.get("lambda", lambda_of_alpha(spec, model, alpha))
        prof = solve_ivp(spec, N, alpha, sc)
        v = push_forward(spec, prof, model, lam)
        back = pull_back(spec, v, lam, model)
        u_back = back.u
        u_ref = prof.evaluate(back.r)[0]
        inv_u = gradient_invariant(spec, prof)
        keep = prof.u > 0
        inv_v = gradient_invariant(model, v)
        v.to_csv(out / "transformed.csv")
        rep["transform"] = {
            "alpha": alpha,
            "lambda": lam,
            "round_trip_error": float(np.max(np.abs(u_back - u_ref) / np.abs(u_ref))),
            "invariant_error": float(np.max(np.abs(inv_v[1:] - inv_u[keep][1:]) / np.abs(inv_u[keep][1:]))),
        }
        lines.append(f"round trip error {rep['transform']['round_trip_error']:.3g}")
    if "alpha_grid" in cfg:
        study = convergence_study(spec, N, model, cfg.get("sigma", 1.0), cfg["alpha_grid"], cfg.get("S"), sc, executor=pool)
        study.to_csv(out / "convergence.csv")
        rep["convergence"] = study.to_dict()
        lines.append(f"convergence strictly decreasing: {study.strictly_decreasing}")
    if "sigma_grid" in cfg:
        bounds = verify_model_bounds(model, N, cfg["sigma_grid"], sc)
        rep["model_bounds"] = bounds.to_dict()
        lines.append(f"model bounds ok: {bounds.ok}")
    if not rep:
        raise ConfigError("transform needs alpha, alpha_grid or sigma_grid")
    return rep, lines


def cmd_singular(cfg, sc, out, pool):
    spec = _spec(cfg)
    N = cfg["N"]
    sp = approximate_singular(
        spec,
        N,
        cfg.get("alpha_ladder", (1e1, 1e2, 1e3, 1e4, 1e5, 1e6)),
        cfg.get("r_min", 1e-2),
        cfg.get("r_max", 1e2),
        sc,
        override=cfg.get("override", False),
        threads=cfg.get("threads", 1),
    )
    sp.to_csv(out / "singular.csv")
    margin = singular_hardy_check(sp)
    decay = verify_decay_bounds(sp)
    rep = {
        "singular": dict(sp.to_dict(), hardy_margin=margin, decay=decay),
        "note": "a nonnegative Hardy margin with the large-u bound makes the singular solution stable on the covered annulus; a negative margin proves nothing",
    }
    return rep, [f"ladder defect {sp.error_estimate:.3g}", f"Hardy margin {margin:.12g}", f"decay exponent {sp.decay_exponent:.6g}"]


def _row(name, ok, value=None):
    return {"check": name, "pass": bool(ok), "value": value}


def cmd_verify_examples(cfg, sc, out, pool):
    N = cfg.get("N", 12)
    threads = cfg.get("threads", 1)
    q1, q2 = 1.2, 1.3
    rows = []
    ce = critical_exponents(N)
    rows.append(_row("gate q2(2N-4q1) <= (N-2)^2/4 for the power sum", q2 * (2 * N - 4 * q1) <= (N - 2) ** 2 / 4, q2 * (2 * N - 4 * q1)))
    rows.append(_row("hardy gate strict below q_JL", hardy_gate(0.5 * (1 + ce.q_JL), N) < 0))

    f1 = power_sum_from_q(q1, q2)
    u = np.logspace(-6, 6, 200)
    curv = f1.curvature_ratio(u)
    rows.append(_row("curvature sandwich q1 <= f'^2/(ff'') <= q2", curv.min() >= q1 and curv.max() <= q2 * (1 + 1e-12), [float(curv.min()), float(curv.max())]))
    qf = f1.q_of(u)
    rows.append(_row("band q1 <= f'F <= q2", qf.min() >= q1 * (1 - 1e-9) and qf.max() <= q2 * (1 + 1e-9), [float(qf.min()), float(qf.max())]))
    c1 = classify_structure(f1, N, sc, threads=threads)
    rows.append(_row("power sum u^6 + u^(13/3) is type II", c1.type == "II", c1.type))

    f2 = power_rational(5.0, 3.0)
    lim = estimate_limits(f2)
    rows.append(_row("power rational u^5/(1+u)^3 limits q0=1.25, q_inf=2", abs(lim.q0 - 1.25) <= 1e-3 and abs(lim.q_inf - 2.0) <= 1e-3, [lim.q0, lim.q_inf]))
    c2 = classify_structure(f2, N, sc, threads=threads)
    rows.append(_row("power rational u^5/(1+u)^3 is type III", c2.type == "III", c2.type))

    model = power_model(5.0)
    mb = verify_model_bounds(model, N, [0.5, 1.0, 2.0], sc)
    rows.append(_row("model profile below W and G(w) above r^2/(2N-4q)", mb.ok))
    prof = solve_ivp(model, N, 1.0, sc)
    margin = verify_F_lower_bound(prof)
    rows.append(_row("F(u) >= r^2/(2N)", margin >= -1e-9, margin))

    rio.write_csv(out / "matrix.csv", ["row", "pass"], [list(range(len(rows))), [1.0 if r["pass"] else 0.0 for r in rows]])
    rep = {"rows": rows, "power_sum": c1.to_dict(), "power_rational": c2.to_dict()}
    lines = [("PASS " if r["pass"] else "FAIL ") + r["check"] for r in rows]
    failing = [r["check"] for r in rows if not r["pass"]]
    if failing:
        exc = ConsistencyError("failing rows: " + "; ".join(failing))
        exc.report = rep
        exc.lines = lines
        raise exc
    return rep, lines


HANDLERS = {
    "exponents": cmd_exponents,
    "solve": cmd_solve,
    "scan": cmd_scan,
    "classify": cmd_classify,
    "transform": cmd_transform,
    "singular": cmd_singular,
    "verify-examples": cmd_verify_examples,
}


def run(cfg, out):
    """Validate ``cfg``, run its command into directory ``out``; return (exit code, report)."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    base = {"config": cfg, "config_sha256": rio.config_hash(cfg)}
    lines = []
    try:
        validate(cfg)
        sc = solver_config(cfg)
        base["tolerances"] = sc.to_dict()
        threads = cfg.get("threads", 1)
        pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
        try:
            body, lines = HANDLERS[cfg["command"]](cfg, sc, out, pool)
        finally:
            if pool is not None:
                pool.shutdown()
        code = EXIT_OK
        report = dict(base, command=cfg["command"], status="ok", **body)
    except ConfigError as exc:
        code = EXIT_INVALID
        report = dict(base, status="invalid-config", error={"type": "ConfigError", "message": str(exc)})
        lines = [f"invalid config: {exc}"]
    except RadstabError as exc:
        code = exc.exit_code
        report = dict(base, command=cfg.get("command"), status="error", error={"type": type(exc).__name__, "message": str(exc)})
        report.update(getattr(exc, "report", {}))
        lines = getattr(exc, "lines", []) + [f"{type(exc).__name__}: {exc}"]
    report["exit_code"] = code
    rio.write_json(out / "report.json", report)
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return code, report


def _parser():
    ap = argparse.ArgumentParser(prog="radstab", description="Stability of radial solutions of -Lap u = f(u).")
    ap.add_argument("config", help="JSON run config path, or - for standard input")
    ap.add_argument("--out", help="output directory (default: config's 'out' or ./radstab-out)")
    ap.add_argument("--rmax", type=float)
    ap.add_argument("--rtol", type=float)
    ap.add_argument("--atol", type=float)
    ap.add_argument("--threads", type=int)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        text = sys.stdin.read() if args.config == "-" else Path(args.config).read_text(encoding="utf-8")
        cfg = json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        print(json.dumps({"exit_code": EXIT_INVALID, "status": "invalid-config"}))
        return EXIT_INVALID
    if not isinstance(cfg, dict):
        cfg = {"invalid": cfg}
    if args.rmax is not None:
        cfg["r_max"] = args.rmax
    for key in ("rtol", "atol"):
        if getattr(args, key) is not None:
            cfg.setdefault("tolerances", {})[key] = getattr(args, key)
    if args.threads is not None:
        cfg["threads"] = args.threads
    out = args.out or cfg.get("out") or "radstab-out"
    code, report = run(cfg, out)
    summary = {"command": cfg.get("command"), "exit_code": code, "status": report["status"], "out": str(out)}
    cls = report.get("classification")
    if cls:
        summary["type"] = cls["type"]
    if "error" in report:
        summary["error"] = report["error"]["message"]
        print(report["error"]["message"], file=sys.stderr)
    print(json.dumps(summary, sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())
