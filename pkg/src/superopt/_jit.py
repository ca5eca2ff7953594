"""Backend selection for the hot kernels.

Kernels are plain Python functions decorated with :func:`njit`.  When numba is
importable and ``SUPEROPT_DISABLE_JIT`` is unset (or ``0``), they are compiled
in nopython mode.  Otherwise the decorator is a no-op and the same functions run
as ordinary Python over numpy arrays; in that mode the test-case evaluation
switches to a column-vectorised numpy interpreter (see ``kernels``).
"""

import os

ENV_FLAG = "SUPEROPT_DISABLE_JIT"

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get(ENV_FLAG, "0") in ("", "0")
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(*args, **kwargs):
    if USE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn
