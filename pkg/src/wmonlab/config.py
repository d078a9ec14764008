"""Library-wide numeric defaults.

``EPS_CMP`` is read at call time, so assigning ``wmonlab.config.EPS_CMP``
changes the comparison tolerance for every operation that follows.
"""

from __future__ import annotations

import os

EPS_CMP = 1e-9

BISECT_TOL = 1e-7
FIT_TOL = 1e-6
DELTA0 = 1e-6
THETA_FACTOR = 100.0
OPT_TASK_LIMIT = 24


def default_theta(n: int) -> float:
    return THETA_FACTOR * n * n


def worker_count() -> int:
    """Worker cap from ``WMONLAB_THREADS`` (defaults to 1)."""
    raw = os.environ.get("WMONLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
