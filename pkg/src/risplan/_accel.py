"""Numba toggle for the hot kernels.

``RISPLAN_NUMBA=0`` (or ``false``/``no``) forces the pure-numpy fallbacks in
:mod:`risplan.kernels`; anything else uses numba when it is importable.
"""

import os

NUMBA_ENABLED = os.environ.get("RISPLAN_NUMBA", "1").lower() not in ("0", "false", "no")

if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:  # numba missing entirely: quiet fallback
        NUMBA_ENABLED = False

if not NUMBA_ENABLED:

    def njit(*args, **kwargs):
        """Identity decorator standing in for numba.njit."""
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap
