"""Switch between numba-compiled loop kernels and plain numpy.

Set ``BILINREG_DISABLE_NUMBA=1`` before import to force the numpy path.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
NUMBA_DISABLED = os.environ.get("BILINREG_DISABLE_NUMBA", "").strip().lower() in {
    "1",
    "true",
    "yes",
    "on",
}
USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED


def jit(func):
    """Compile ``func`` with numba when available, else return it untouched.

    This is independent of the env flag so both paths stay importable for
    tests and the benchmark.
    """
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def select(loop_impl, numpy_impl):
    return loop_impl if USE_NUMBA else numpy_impl


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
