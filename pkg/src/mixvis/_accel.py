"""Numba on/off switch for the hot kernels.

Every hot kernel in :mod:`mixvis.kernels` ships in two flavors: a numba
``@njit`` scalar loop and a vectorized numpy implementation. The numba path
is the default; set ``MIXVIS_DISABLE_NUMBA=1`` to force the numpy path
(also used automatically when numba is not importable). Both flavors stay
importable so ``benchmarks/bench_kernels.py`` can time them side by side.
"""

import os


def _numba_wanted() -> bool:
    flag = os.environ.get("MIXVIS_DISABLE_NUMBA", "0").strip().lower()
    return flag not in ("1", "true", "yes", "on")


USE_NUMBA = False
if _numba_wanted():
    try:
        from numba import njit  # noqa: F401

        USE_NUMBA = True
    except ImportError:
        USE_NUMBA = False

if not USE_NUMBA:

    def njit(*args, **kwargs):  # noqa: D103 - mirror numba.njit's call forms
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap
