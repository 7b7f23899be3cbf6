"""Enumeration caps.

Every exponential enumeration in the package checks one of these limits
before starting.  ``ENTROLAB_CAP_CELLS`` overrides the cell cap; the
other caps are plain module constants that callers may pass explicitly.
"""

import os

DEFAULT_CAP_CELLS = 1 << 22
DEFAULT_CAP_BALL = 10**6
EXACT_SOLVER_POINTS = 24


def cap_cells(override=None):
    if override is not None:
        return int(override)
    env = os.environ.get("ENTROLAB_CAP_CELLS")
    if env:
        return int(env)
    return DEFAULT_CAP_CELLS
