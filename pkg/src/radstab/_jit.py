"""Optional numba acceleration.

Set ``RADSTAB_DISABLE_JIT=1`` to run every kernel as plain Python.  The
interpreted path executes the same source, so results agree to rounding.
"""

import os
import types

JIT_ENABLED = os.environ.get("RADSTAB_DISABLE_JIT", "").strip().lower() not in ("1", "true", "yes", "on")

if JIT_ENABLED:
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        JIT_ENABLED = False


def maybe_njit(func=None, **kwargs):
    """``numba.njit`` when acceleration is enabled, identity otherwise."""

    def wrap(f):
        if not JIT_ENABLED:
            return f
        opts = {"cache": True, "nogil": True}
        opts.update(kwargs)
        return numba.njit(**opts)(f)

    if func is None:
        return wrap
    return wrap(func)


def py_func(f):
    """Return the interpreted version of a possibly-jitted function."""
    return getattr(f, "py_func", f)


def interpreted_namespace(namespace, names):
    """Rebuild ``names`` as plain functions that call each other uninterpreted.

    ``py_func`` alone is not enough: the body of an interpreted function still
    resolves its callees to the jitted dispatchers, which reject Python
    closures as arguments.
    """
    g = dict(namespace)
    for name in names:
        src = py_func(namespace[name])
        g[name] = types.FunctionType(src.__code__, g, name, src.__defaults__)
    return g
