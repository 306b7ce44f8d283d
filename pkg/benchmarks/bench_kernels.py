"""Compiled vs interpreted integrator kernels.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--rmax 100]

The interpreted side runs the same kernel source with every callee
(including the family evaluators) as plain Python, which is what
``RADSTAB_DISABLE_JIT=1`` selects.  ``--end-to-end`` also times a CLI
classify run in both modes as subprocesses.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from radstab import _families, _rk
from radstab._jit import JIT_ENABLED, interpreted_namespace
from radstab.nonlinearity import power
from radstab.radial_ode import DEFAULT_CONFIG, _atol_vector, _series, start_radius


def _interpreted():
    fam_names = [n for n, v in vars(_families).items() if callable(getattr(v, "py_func", None))]
    fam = interpreted_namespace(vars(_families), fam_names)
    ns = {**vars(_rk), "evaluate": fam["evaluate"], "difference": fam["difference"]}
    return interpreted_namespace(ns, _rk.KERNEL_NAMES)["integrate"]


def _problem(p, N, alpha, r_max):
    f = power(p)
    f0, f1, _ = (float(v) for v in f.fev(f.kparams, alpha))
    r0 = start_radius(f1)
    u, du = _series(N, alpha, f0, f1, r0)
    y0 = np.array([u, du, 0.0, 0.0])
    atol = np.asarray(_atol_vector(DEFAULT_CONFIG, alpha), dtype=float)
    args = (f.code, f.kparams, 0, float(N), r0, y0, float(r_max), DEFAULT_CONFIG.rtol, atol, True, False, 5_000_000)
    return args


def _time(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        rs, _, status = fn(*args)
        best = min(best, time.perf_counter() - t)
    return best, rs.shape[0], status


def _end_to_end():
    cfg = json.dumps({"command": "classify", "N": 12, "nonlinearity": {"family": "power", "p": 5}, "alpha_grid": [0.5, 1.0, 2.0, 4.0]})
    out = {}
    for label, flag in (("jit", "0"), ("interpreted", "1")):
        env = dict(os.environ, RADSTAB_DISABLE_JIT=flag)
        t = time.perf_counter()
        subprocess.run([sys.executable, "-m", "radstab", "-", "--out", f"/tmp/radstab-bench-{label}"], input=cfg, text=True, env=env, check=True, capture_output=True)
        out[label] = time.perf_counter() - t
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--rmax", type=float, default=100.0)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args()

    print(f"jit enabled in this process: {JIT_ENABLED}")
    interp = _interpreted()
    for p, alpha in ((2.0, 1.0), (5.0, 1.0)):
        prob = _problem(p, 12, alpha, args.rmax)
        _rk.integrate(*prob)  # compile / load cache
        t_jit, n_jit, _ = _time(_rk.integrate, prob, args.repeat)
        t_py, n_py, _ = _time(interp, prob, 1)
        print(f"p={p:g} alpha={alpha:g} steps={n_jit}/{n_py}  jit {t_jit * 1e3:8.2f} ms  interpreted {t_py * 1e3:9.1f} ms  speedup {t_py / t_jit:7.1f}x")
    if args.end_to_end:
        res = _end_to_end()
        print(f"classify end to end: jit {res['jit']:.2f} s, interpreted {res['interpreted']:.2f} s")


if __name__ == "__main__":
    main()
