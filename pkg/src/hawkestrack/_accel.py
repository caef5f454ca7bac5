"""Numba JIT shim: compiled hot loops with a pure-numpy fallback.

Set HAWKESTRACK_NUMBA=0 (or "false"/"off") to force the fallback path; the
same source runs either way.  Random streams are reproduced exactly (numba
implements numpy's legacy MT19937); numeric outputs agree to the last few
ulps (the two backends may round transcendentals differently).
"""

import os

_FLAG = os.environ.get("HAWKESTRACK_NUMBA", "1").strip().lower()
_WANT_NUMBA = _FLAG not in {"0", "false", "off", "no"}

if _WANT_NUMBA:
    try:
        from numba import njit

        _HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a hard dep, but stay usable
        _HAVE_NUMBA = False
else:
    _HAVE_NUMBA = False

if not _HAVE_NUMBA:

    def njit(*args, **kwargs):  # noqa: D103 - mirror numba's decorator shapes
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


def using_numba() -> bool:
    """True when hot loops are JIT-compiled in this process."""
    return _HAVE_NUMBA


def py_func(fn):
    """Return the uncompiled Python version of a (possibly) jitted function."""
    return getattr(fn, "py_func", fn)
