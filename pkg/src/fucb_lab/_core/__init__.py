"""Per-bin UCB state machine: compiled core with a pure-Python fallback.

The compiled extension is selected at import time when available; setting
the environment variable FUCB_LAB_PURE_PYTHON=1 forces the fallback.  Both
implementations perform the same floating-point operations in the same
order, so traces are bit-identical across backends.
"""

import os

KIND_MEAN = 0
KIND_QUANTILE = 1
KIND_TRIMMED = 2

if os.environ.get("FUCB_LAB_PURE_PYTHON"):
    from ._pure import FUcbCore, run_episode_loop
else:
    try:
        from ._speedups import FUcbCore, run_episode_loop
    except ImportError:  # extension not built; fall back
        from ._pure import FUcbCore, run_episode_loop


def backend_name() -> str:
    return FUcbCore.backend
