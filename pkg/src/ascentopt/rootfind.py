"""Safeguarded scalar root finding used by the solvers.

Two shapes recur throughout the package:

* a non-increasing function of a nonnegative shift (block equations of the
  dual method), solved by bracket doubling followed by bisection;
* an increasing function of a level (oracle segments, synthesized derivative
  inverses), solved by two-sided bracket expansion and bisection.
"""

from __future__ import annotations

import math
from typing import Callable

from .errors import NumericalError

MAX_DOUBLINGS = 200
MAX_BISECT = 200


def smallest_root_nonincreasing(
    fn: Callable[[float], float],
    eq_tol: float,
    *,
    max_doublings: int = MAX_DOUBLINGS,
    max_iter: int = MAX_BISECT,
) -> float:
    """Return the smallest xi >= 0 with fn(xi) = 0 for non-increasing fn.

    Requires fn(0) >= 0 up to roundoff.  Brackets by doubling from 1 until
    fn <= 0, then bisects; the returned point sits on the fn <= 0 side of
    the bracket with |fn| <= eq_tol, biased toward the smallest root when
    the root set is an interval.
    """
    f0 = fn(0.0)
    if f0 <= 0.0:
        return 0.0
    hi = 1.0
    f_hi = fn(hi)
    doublings = 0
    lo, f_lo = 0.0, f0
    while f_hi > 0.0:
        doublings += 1
        if doublings > max_doublings:
            raise NumericalError(
                "bracket expansion failed after %d doublings" % max_doublings
            )
        lo, f_lo = hi, f_hi
        hi *= 2.0
        f_hi = fn(hi)
    xtol = max(eq_tol, 1e-12 * hi)
    for _ in range(max_iter):
        if hi - lo <= xtol and abs(f_hi) <= eq_tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        v = fn(mid)
        if v > 0.0:
            lo, f_lo = mid, v
        else:
            hi, f_hi = mid, v
    return hi


def invert_increasing(
    fn: Callable[[float], float],
    target: float,
    lo: float,
    hi: float,
    *,
    tol: float = 1e-12,
    max_iter: int = MAX_BISECT,
    expand: bool = False,
) -> float:
    """Solve fn(x) = target for increasing fn on [lo, hi] by bisection.

    With expand=True the bracket ends are pushed outward by doubling when the
    target lies outside fn([lo, hi]); infinite ends are replaced by expanding
    finite ones.  Targets beyond a non-expandable end clamp to that end.
    """
    if math.isinf(target):
        return lo if target < 0 else hi

    span = 1.0
    if math.isinf(hi):
        hi = max(lo, 0.0) + span
        while fn(hi) < target:
            span *= 2.0
            hi += span
            if span > 1e300:
                raise NumericalError("upward bracket expansion failed")
    elif expand:
        n = 0
        while fn(hi) < target:
            n += 1
            if n > MAX_DOUBLINGS:
                return hi
            hi = lo + 2.0 * (hi - lo)

    if math.isinf(lo):
        lo = min(hi, 0.0) - span
        while fn(lo) > target:
            span *= 2.0
            lo -= span
            if span > 1e300:
                raise NumericalError("downward bracket expansion failed")
    elif expand:
        n = 0
        while fn(lo) > target:
            n += 1
            if n > MAX_DOUBLINGS:
                return lo
            lo = hi - 2.0 * (hi - lo)

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if fn(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, abs(lo), abs(hi)):
            break
    return 0.5 * (lo + hi)
