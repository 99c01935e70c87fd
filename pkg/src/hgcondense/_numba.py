"""Numba shim.

Set ``HGCONDENSE_DISABLE_NUMBA=1`` to route every kernel through its
pure-numpy implementation. If numba is not importable the ``njit``
decorator degrades to the identity so the loop kernels still run
(slowly) as plain Python.
"""
import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep in practice
    numba = None
    HAVE_NUMBA = False

_flag = os.environ.get("HGCONDENSE_DISABLE_NUMBA", "").strip().lower()
DISABLED = _flag not in ("", "0", "false", "no")
USE_NUMBA = HAVE_NUMBA and not DISABLED


def njit(*args, **kwargs):
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def backend():
    return "numba" if USE_NUMBA else "numpy"
