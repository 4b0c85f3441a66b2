"""Exact linear minimization oracles and supporting geometry.

Linear minimization over the weighted ball is a soft-thresholding operation:

    z_i = -sign(p_i) * max(0, |p_i|/lam - w_{perm(i)})

with the multiplier lam > 0 fixed by the active constraint h(z) = C^2. The
map lam -> h(z(lam)) is continuous, nonincreasing, diverges as lam -> 0+ and
vanishes at lam = max_i |p_i|/w_{perm(i)}, so the multiplier is found by
bisection (the functional has kinks at every |p_i|/w_{perm(i)}, which rules
out Newton steps).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._roots import MAX_BISECT_ITERS, bisect_target
from .instances import (
    BOUNDARY_RTOL,
    RESIDUAL_RTOL,
    SimplexSet,
    SmoothedInstance,
    WeightedBallSet,
)

# Coordinates whose soft-threshold argument is within this relative margin of
# the kink are set to literal zero. The hard construction places one
# coordinate exactly at its threshold for tail-constant queries (adjacent
# squared weights differ by exactly 2C^2), so without the guard the sign of a
# one-ulp rounding error would decide between 0.0 and ~1e-16.
THRESHOLD_GUARD_RTOL = 1e-12


class ZeroQueryError(ValueError):
    """Raised for the ambiguous LMO query p = 0."""

    def __init__(self):
        super().__init__("ambiguous LMO query: p = 0 has no informative minimizer")


def eval_constraint(s: WeightedBallSet, x: np.ndarray) -> float:
    """h(x) = 0.5*||x||^2 + sum_i w_{perm(i)} |x_i|."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (s.d,):
        raise ValueError(f"expected a length-{s.d} vector, got shape {x.shape}")
    return 0.5 * float(np.dot(x, x)) + float(np.dot(s.coordinate_weights, np.abs(x)))


def contains(s: WeightedBallSet, x: np.ndarray, tol: float = BOUNDARY_RTOL) -> bool:
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")
    return eval_constraint(s, x) <= s.level * (1.0 + tol)


def soft_threshold(p: np.ndarray, lam: float, weights: np.ndarray) -> np.ndarray:
    """Assemble the minimizer from a multiplier; thresholded coordinates are
    exact floating-point zeros (guarded against knife-edge kink ties)."""
    t = np.abs(p) / lam - weights
    active = t > THRESHOLD_GUARD_RTOL * weights
    return np.where(active, -np.sign(p) * t, 0.0)


@dataclass(frozen=True)
class LmoResult:
    """An LMO answer: minimizer, KKT multiplier, and boundary residual."""

    z: np.ndarray
    lam: float | None
    constraint_residual: float


def _solve_multiplier_batch(
    P: np.ndarray, weights: np.ndarray, level: float, tol: float
) -> np.ndarray:
    """Bisect the KKT multiplier for each row of P (rows must be nonzero)."""
    absP = np.abs(P)
    lo = np.zeros(P.shape[0])
    hi = np.max(absP / weights, axis=1)

    def h_of(lam: np.ndarray) -> np.ndarray:
        t = absP / lam[:, None] - weights
        np.maximum(t, 0.0, out=t)
        return 0.5 * np.einsum("ij,ij->i", t, t) + t @ weights

    mid = 0.5 * (lo + hi)
    for _ in range(MAX_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        vals = h_of(mid)
        if np.all(np.abs(vals - level) <= tol):
            break
        high = vals >= level
        lo = np.where(high, mid, lo)
        hi = np.where(high, hi, mid)
    return mid


def solve_multiplier(p: np.ndarray, weights: np.ndarray, level: float) -> float:
    """KKT multiplier for a single (possibly restricted) soft-threshold system."""
    tol = RESIDUAL_RTOL * level
    lam = _solve_multiplier_batch(p[None, :], weights, level, tol)
    return float(lam[0])


def lmo_weighted_ball(s: WeightedBallSet, p: np.ndarray) -> LmoResult:
    """Exact LMO over the weighted ball for a nonzero query."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (s.d,):
        raise ValueError(f"expected a length-{s.d} vector, got shape {p.shape}")
    if not np.any(p):
        raise ZeroQueryError()
    weights = s.coordinate_weights
    lam = solve_multiplier(p, weights, s.level)
    z = soft_threshold(p, lam, weights)
    resid = abs(eval_constraint(s, z) - s.level)
    if resid > RESIDUAL_RTOL * s.level:
        raise ArithmeticError(f"LMO residual {resid:.3e} exceeds tolerance")
    return LmoResult(z=z, lam=lam, constraint_residual=resid)


def lmo_weighted_ball_batch(
    s: WeightedBallSet, P: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized LMO for a stack of nonzero queries; returns (Z, lam, resid)."""
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[1] != s.d:
        raise ValueError(f"expected an (n, {s.d}) array, got shape {P.shape}")
    if not np.all(np.any(P, axis=1)):
        raise ZeroQueryError()
    weights = s.coordinate_weights
    level = s.level
    lam = _solve_multiplier_batch(P, weights, level, RESIDUAL_RTOL * level)
    t = np.abs(P) / lam[:, None] - weights
    active = t > THRESHOLD_GUARD_RTOL * weights
    Z = np.where(active, -np.sign(P) * t, 0.0)
    resid = np.abs(
        0.5 * np.einsum("ij,ij->i", Z, Z) + np.abs(Z) @ weights - level
    )
    if np.any(resid > RESIDUAL_RTOL * level):
        raise ArithmeticError("batched LMO residual exceeds tolerance")
    return Z, lam, resid


def lmo_simplex(d: int, p: np.ndarray) -> np.ndarray:
    """Adversarial simplex LMO: zero vector when no coordinate improves,
    otherwise the minimal-index attaining basis vector."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (d,):
        raise ValueError(f"expected a length-{d} vector, got shape {p.shape}")
    z = np.zeros(d)
    j = int(np.argmin(p))
    if p[j] < 0.0:
        z[j] = 1.0
    return z


def lmo_minkowski(smoothed: SmoothedInstance, p: np.ndarray) -> np.ndarray:
    """LMO of the Minkowski sum: base LMO minus the normalized ball term."""
    p = np.asarray(p, dtype=np.float64)
    if not np.any(p):
        raise ZeroQueryError()
    if isinstance(smoothed.base, SimplexSet):
        z = lmo_simplex(smoothed.base.d, p)
    else:
        z = lmo_weighted_ball(smoothed.base, p).z
    return z - p / (smoothed.beta * float(np.linalg.norm(p)))


@dataclass(frozen=True)
class ProjectionResult:
    """Nearest point in the weighted ball, with its KKT multiplier."""

    y: np.ndarray
    gamma: float
    distance: float


def project_onto_weighted_ball(s: WeightedBallSet, x: np.ndarray) -> ProjectionResult:
    """Euclidean projection via the shrinkage form
    y_i = sign(x_i) * max(0, (|x_i| - gamma*w_{perm(i)}) / (1 + gamma))."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (s.d,):
        raise ValueError(f"expected a length-{s.d} vector, got shape {x.shape}")
    level = s.level
    if eval_constraint(s, x) <= level:
        return ProjectionResult(y=x.copy(), gamma=0.0, distance=0.0)
    weights = s.coordinate_weights
    absx = np.abs(x)
    sign = np.sign(x)

    def shrink(gamma: float) -> np.ndarray:
        t = (absx - gamma * weights) / (1.0 + gamma)
        np.maximum(t, 0.0, out=t)
        return sign * t

    def h_of(gamma: float) -> float:
        y = shrink(gamma)
        return 0.5 * float(np.dot(y, y)) + float(np.dot(weights, np.abs(y)))

    # gamma = max|x_i|/w_i shrinks everything to zero, so h crosses level.
    hi = float(np.max(absx / weights))
    gamma = bisect_target(
        h_of, lo=0.0, hi=hi, target=level, tol=RESIDUAL_RTOL * level, increasing=False
    )
    y = shrink(gamma)
    resid = abs(eval_constraint(s, y) - level)
    if resid > RESIDUAL_RTOL * level:
        raise ArithmeticError(f"projection residual {resid:.3e} exceeds tolerance")
    return ProjectionResult(y=y, gamma=gamma, distance=float(np.linalg.norm(x - y)))


def project_onto_simplex(d: int, x: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x : sum(x) <= 1, x >= 0}."""
    x = np.asarray(x, dtype=np.float64)
    y = np.maximum(x, 0.0)
    if y.sum() <= 1.0:
        return y
    # project onto the face sum = 1 (Duchi-style sorted threshold)
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, d + 1)
    rho = int(np.nonzero(u - css / ks > 0)[0][-1])
    theta = css[rho] / (rho + 1.0)
    return np.maximum(x - theta, 0.0)


def smoothed_contains(smoothed: SmoothedInstance, x: np.ndarray,
                      tol: float = BOUNDARY_RTOL) -> bool:
    """Membership in S + B(0, 1/beta): distance to the base at most 1/beta."""
    x = np.asarray(x, dtype=np.float64)
    if isinstance(smoothed.base, SimplexSet):
        dist = float(np.linalg.norm(x - project_onto_simplex(smoothed.base.d, x)))
    else:
        dist = project_onto_weighted_ball(smoothed.base, x).distance
    radius = 1.0 / smoothed.beta
    return dist <= radius + tol * max(radius, 1.0)


def boundary_scale(s: WeightedBallSet, u: np.ndarray) -> np.ndarray:
    """Boundary point r*u along a unit direction u, with h(r*u) = C^2."""
    u = np.asarray(u, dtype=np.float64)
    nrm = float(np.linalg.norm(u))
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError("direction must have unit norm")
    level = s.level
    weights = s.coordinate_weights
    wu = float(np.dot(weights, np.abs(u)))

    def h_of(r: float) -> float:
        return 0.5 * r * r + r * wu

    # h(2C * u) >= 2C^2 > C^2, so [0, 2C] brackets the crossing.
    r = bisect_target(
        h_of, lo=0.0, hi=2.0 * s.C, target=level, tol=RESIDUAL_RTOL * level,
        increasing=True,
    )
    return r * u


def boundary_points(s: WeightedBallSet, U: np.ndarray) -> np.ndarray:
    """Vectorized boundary_scale for a stack of unit directions (rows)."""
    U = np.asarray(U, dtype=np.float64)
    level = s.level
    wu = np.abs(U) @ s.coordinate_weights
    # positive root of 0.5 r^2 + wu r = level (independent of boundary_scale's
    # bisection, so the two routes can be cross-checked)
    r = -wu + np.sqrt(wu * wu + 2.0 * level)
    return U * r[:, None]
