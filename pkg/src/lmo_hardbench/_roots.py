"""Bisection root finders shared by the instance builders and oracles.

Every scalar equation in this package is solved by bisection on a monotone
map. Newton-type iterations are deliberately avoided: the constraint
functionals are piecewise smooth with kinks at the soft-threshold breakpoints.
"""
from __future__ import annotations

from typing import Callable

MAX_BISECT_ITERS = 200


def bisect_target(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    target: float,
    tol: float,
    increasing: bool,
    max_iters: int = MAX_BISECT_ITERS,
) -> float:
    """Solve fn(x) = target on [lo, hi] for a monotone fn.

    Stops once |fn(mid) - target| <= tol or after max_iters halvings,
    whichever comes first. fn is never evaluated at lo, so an open lower
    endpoint (e.g. a multiplier that must stay positive) is safe.
    """
    if not hi > lo:
        raise ValueError(f"invalid bracket [{lo}, {hi}]")
    mid = 0.5 * (lo + hi)
    for _ in range(max_iters):
        mid = 0.5 * (lo + hi)
        val = fn(mid)
        if abs(val - target) <= tol:
            return mid
        if (val < target) == increasing:
            lo = mid
        else:
            hi = mid
    return mid
