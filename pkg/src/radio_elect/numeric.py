"""Ceiling of transcendental expressions with a near-integer guard.

``alpha ** j`` and ``log(log2 n) / log(alpha)`` are computed in floating
point, so an exact integer such as 2.0 ** 3 or log2(log2 256) can come out
as 8.000000000000002 or 2.9999999999999996. Values within ``NEAR_INTEGER_TOL``
of an integer are snapped to it before the ceiling is taken.
"""

import math

NEAR_INTEGER_TOL = 1e-9


def ceil_near(x: float, tol: float = NEAR_INTEGER_TOL) -> int:
    nearest = round(x)
    if abs(x - nearest) <= tol:
        return int(nearest)
    return math.ceil(x)
