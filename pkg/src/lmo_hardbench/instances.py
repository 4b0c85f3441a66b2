"""Construction of the hard problem instances.

The central object is a weighted ball

    S = { x : 0.5*||x||^2 + sum_i w_{perm(i)} |x_i| <= C^2 },

with C = 1/sqrt(d^2 + d + 2) and canonical weights w_k = C*sqrt(2k). Three
families are built on top of it: the base instance with minimizer nu*1 on the
boundary, a permuted family whose objective hides which coordinate carries
which weight, and Minkowski-smoothed variants S + B(0, 1/beta).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from ._roots import bisect_target

# Relative residual accepted when a scalar is substituted back into its
# defining equation. The natural scale of every such equation is C^2.
RESIDUAL_RTOL = 1e-12

# Default relative tolerance for boundary/feasibility checks.
BOUNDARY_RTOL = 1e-10


@dataclass(frozen=True)
class WeightedBallSet:
    """Weighted-ball feasible region.

    Weights are stored in canonical ascending order; ``perm`` maps each
    coordinate index to its weight rank (1-based), so the base set and all
    its coordinate permutations share one constraint evaluator.
    """

    d: int
    C: float
    w: np.ndarray
    W: float
    perm: np.ndarray

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be a positive integer")
        if self.C <= 0:
            raise ValueError("normalization constant must be positive")
        if self.w.shape != (self.d,) or self.perm.shape != (self.d,):
            raise ValueError("weight/permutation length must equal d")
        if sorted(self.perm.tolist()) != list(range(1, self.d + 1)):
            raise ValueError("perm must be a bijection on {1..d}")

    @property
    def coordinate_weights(self) -> np.ndarray:
        """Weight attached to each coordinate, w_{perm(i)}."""
        return self.w[self.perm - 1]

    @property
    def level(self) -> float:
        """Right-hand side C^2 of the defining constraint."""
        return self.C * self.C

    def with_perm(self, perm: np.ndarray) -> "WeightedBallSet":
        perm = np.asarray(perm, dtype=np.int64)
        return WeightedBallSet(self.d, self.C, self.w, self.W, perm)


@dataclass(frozen=True)
class SimplexSet:
    """The region {x : sum(x) <= 1, x >= 0}, used as a smoothing base."""

    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be a positive integer")

    @property
    def diameter(self) -> float:
        return math.sqrt(2.0) if self.d >= 2 else 1.0


@dataclass(frozen=True)
class QuadraticObjective:
    """f(x) = (L/2) ||x - x_star||^2 with gradient L (x - x_star)."""

    L: float
    x_star: np.ndarray

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError("smoothness constant must be positive")

    def value(self, x: np.ndarray) -> float:
        diff = x - self.x_star
        return 0.5 * self.L * float(np.dot(diff, diff))

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.L * (x - self.x_star)


@dataclass(frozen=True)
class HardInstance:
    set: WeightedBallSet
    objective: QuadraticObjective
    nu: float
    alpha: float = 1.0

    @property
    def d(self) -> int:
        return self.set.d


@dataclass(frozen=True)
class PermutedFamily:
    """Shared data of the permuted hard instances S_pi.

    The objective f(x) = 0.5*||x - M*1||^2 is the same for every member of
    the family; only the constraint set depends on the permutation.
    """

    d: int
    base_set: WeightedBallSet
    rho: float
    M: float

    def objective(self) -> QuadraticObjective:
        return QuadraticObjective(L=1.0, x_star=self.M * np.ones(self.d))

    def set_for(self, perm: np.ndarray) -> WeightedBallSet:
        return self.base_set.with_perm(perm)


@dataclass(frozen=True)
class SmoothedInstance:
    """Minkowski sum S + B(0, 1/beta) of a base set with a small ball."""

    base: Union[WeightedBallSet, SimplexSet]
    beta: float
    objective: QuadraticObjective
    tail_value: float

    @property
    def d(self) -> int:
        return self.base.d

    @property
    def base_diameter(self) -> float:
        if isinstance(self.base, SimplexSet):
            return self.base.diameter
        return diameter(self.base)

    @property
    def diameter(self) -> float:
        return self.base_diameter + 2.0 / self.beta


def identity_perm(d: int) -> np.ndarray:
    return np.arange(1, d + 1, dtype=np.int64)


def build_weighted_ball(d: int) -> WeightedBallSet:
    """Canonical weighted ball: C = 1/sqrt(d^2+d+2), w_k = C*sqrt(2k)."""
    if d < 1:
        raise ValueError("dimension must be a positive integer")
    C = 1.0 / math.sqrt(d * d + d + 2)
    w = C * np.sqrt(2.0 * np.arange(1, d + 1, dtype=np.float64))
    return WeightedBallSet(d=d, C=C, w=w, W=float(w.sum()), perm=identity_perm(d))


def scale_set(s: WeightedBallSet, factor: float) -> WeightedBallSet:
    """Image factor*S of the set; stays in the weighted-ball family with
    C -> factor*C."""
    if factor <= 0:
        raise ValueError("scale factor must be positive")
    return WeightedBallSet(
        d=s.d, C=factor * s.C, w=factor * s.w, W=factor * s.W, perm=s.perm
    )


def compute_nu(s: WeightedBallSet) -> float:
    """Positive root of 0.5*d*nu^2 + W*nu = C^2.

    Uses the rationalized quadratic-formula form throughout; the plain form
    cancels catastrophically once W^2 >> 2*d*C^2.
    """
    C2 = s.level
    disc = math.sqrt(s.W * s.W + 2.0 * s.d * C2)
    nu = 2.0 * C2 / (s.W + disc)
    resid = abs(0.5 * s.d * nu * nu + s.W * nu - C2)
    if resid > RESIDUAL_RTOL * C2:
        raise ArithmeticError(f"nu residual {resid:.3e} exceeds tolerance")
    return nu


def diameter(s: WeightedBallSet) -> float:
    """Exact diameter 2*C*(2 - sqrt(2)) of the weighted ball."""
    return 2.0 * s.C * (2.0 - math.sqrt(2.0))


def diameter_attaining_points(s: WeightedBallSet) -> tuple[np.ndarray, np.ndarray]:
    """The pair of boundary points realizing the diameter.

    They sit on the coordinate carrying weight rank 1 (the smallest weight).
    """
    j = int(np.nonzero(s.perm == 1)[0][0])
    r = s.C * (2.0 - math.sqrt(2.0))
    x = np.zeros(s.d)
    x[j] = r
    return x, -x


def build_hard_instance(d: int, L: float = 1.0, alpha: float = 1.0) -> HardInstance:
    """Unit instance rescaled to L-smoothness and alpha-strong convexity.

    The set scales by 1/alpha (diameter included) and objective gaps scale
    by L/alpha^2 relative to the unit instance.
    """
    if L <= 0 or alpha <= 0:
        raise ValueError("L and alpha must be positive")
    unit = build_weighted_ball(d)
    nu_unit = compute_nu(unit)
    s = scale_set(unit, 1.0 / alpha)
    nu = nu_unit / alpha
    objective = QuadraticObjective(L=L, x_star=nu * np.ones(d))
    return HardInstance(set=s, objective=objective, nu=nu, alpha=alpha)


def _rho_polynomial_coeffs(s: WeightedBallSet) -> tuple[float, float]:
    wd = s.w[-1]
    a = 0.5 * float(np.sum((wd - s.w) ** 2))
    b = float(np.sum(s.w * (wd - s.w)))
    return a, b


def build_permuted_family(d: int) -> PermutedFamily:
    """Root-find rho on (0, 1) and assemble the permuted family.

    The defining polynomial a*rho^2 + b*rho is increasing on rho > 0, equals
    0 at rho = 0 and exceeds C^2 at rho = 1 once d >= 3, so bisection on
    (0, 1) is safe.
    """
    if d < 3:
        raise ValueError("the permuted family requires d >= 3")
    s = build_weighted_ball(d)
    C2 = s.level
    a, b = _rho_polynomial_coeffs(s)
    rho = bisect_target(
        lambda r: a * r * r + b * r,
        lo=0.0,
        hi=1.0,
        target=C2,
        tol=RESIDUAL_RTOL * C2,
        increasing=True,
    )
    resid = abs(a * rho * rho + b * rho - C2)
    if resid > RESIDUAL_RTOL * C2:
        raise ArithmeticError(f"rho residual {resid:.3e} exceeds tolerance")
    if not 0.0 < rho < 1.0:
        raise ArithmeticError("rho escaped (0, 1)")
    M = rho / (1.0 - rho) * float(s.w[-1])
    return PermutedFamily(d=d, base_set=s, rho=rho, M=M)


def optimum_for_permutation(family: PermutedFamily, perm: np.ndarray) -> np.ndarray:
    """Constrained minimizer of the family objective over S_perm,
    elementwise rho * (w_d - w_{perm(i)})."""
    perm = np.asarray(perm, dtype=np.int64)
    if sorted(perm.tolist()) != list(range(1, family.d + 1)):
        raise ValueError("perm must be a bijection on {1..d}")
    w = family.base_set.w
    return family.rho * (w[-1] - w[perm - 1])


def compute_nu_beta(s: WeightedBallSet, beta: float) -> float:
    """Scalar eta > nu with dist(eta*1, S) = 1/beta.

    Outer bisection on eta; the inner evaluation is the exact Euclidean
    distance to the weighted ball, via its KKT shrinkage projection.
    """
    from .lmo import project_onto_weighted_ball

    if beta <= 0:
        raise ValueError("beta must be positive")
    nu = compute_nu(s)
    ones = np.ones(s.d)
    radius = 1.0 / beta

    def dist(eta: float) -> float:
        return project_onto_weighted_ball(s, eta * ones).distance

    # dist((nu + 1/beta)*1, S) >= 1/beta since the outward normal at nu*1 has
    # ||n||_1 >= ||n||_2; the extra margin keeps the root strictly bracketed.
    hi = nu + radius * (1.0 + 1e-3)
    nu_beta = bisect_target(dist, lo=nu, hi=hi, target=radius, tol=1e-10, increasing=True)
    if abs(dist(nu_beta) - radius) > 1e-10:
        raise ArithmeticError("nu_beta distance residual exceeds tolerance")
    return nu_beta


def build_smoothed_instance(base_kind: str, d: int, beta: float) -> SmoothedInstance:
    """Smoothed instance over a simplex or weighted-ball base.

    Simplex base: x_star = (1/d + 1/(beta*sqrt(d))) * 1.
    Weighted-ball base: x_star = nu_beta * 1.
    Either way x_star sits on the boundary of the Minkowski sum.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    if base_kind == "simplex":
        base: Union[WeightedBallSet, SimplexSet] = SimplexSet(d)
        tail = 1.0 / d + 1.0 / (beta * math.sqrt(d))
    elif base_kind in ("ball", "weighted-ball", "weightedBall"):
        ball = build_weighted_ball(d)
        base = ball
        tail = compute_nu_beta(ball, beta)
    else:
        raise ValueError(f"unknown smoothing base {base_kind!r}")
    objective = QuadraticObjective(L=1.0, x_star=tail * np.ones(d))
    return SmoothedInstance(base=base, beta=beta, objective=objective, tail_value=tail)


# --- JSON serialization -----------------------------------------------------

def instance_to_dict(obj) -> dict:
    """Flat JSON document with the agreed field names
    {kind, d, C, w, perm, L, alpha, nu|rho|beta, x_star}."""
    if isinstance(obj, HardInstance):
        return {
            "kind": "ball",
            "d": obj.d,
            "C": obj.set.C,
            "w": obj.set.w.tolist(),
            "perm": obj.set.perm.tolist(),
            "L": obj.objective.L,
            "alpha": obj.alpha,
            "nu": obj.nu,
            "x_star": obj.objective.x_star.tolist(),
        }
    if isinstance(obj, PermutedFamily):
        x_star = optimum_for_permutation(obj, obj.base_set.perm)
        return {
            "kind": "permuted",
            "d": obj.d,
            "C": obj.base_set.C,
            "w": obj.base_set.w.tolist(),
            "perm": obj.base_set.perm.tolist(),
            "L": 1.0,
            "alpha": 1.0,
            "rho": obj.rho,
            "M": obj.M,
            "x_star": x_star.tolist(),
        }
    if isinstance(obj, SmoothedInstance):
        is_simplex = isinstance(obj.base, SimplexSet)
        return {
            "kind": "smoothed",
            "base": "simplex" if is_simplex else "ball",
            "d": obj.d,
            "C": None if is_simplex else obj.base.C,
            "w": [] if is_simplex else obj.base.w.tolist(),
            "perm": [] if is_simplex else obj.base.perm.tolist(),
            "L": obj.objective.L,
            "alpha": 1.0,
            "beta": obj.beta,
            "diameter": obj.diameter,
            "x_star": obj.objective.x_star.tolist(),
        }
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def instance_from_dict(doc: dict):
    kind = doc["kind"]
    d = int(doc["d"])
    if kind == "ball":
        w = np.asarray(doc["w"], dtype=np.float64)
        s = WeightedBallSet(
            d=d,
            C=float(doc["C"]),
            w=w,
            W=float(w.sum()),
            perm=np.asarray(doc["perm"], dtype=np.int64),
        )
        objective = QuadraticObjective(
            L=float(doc["L"]), x_star=np.asarray(doc["x_star"], dtype=np.float64)
        )
        return HardInstance(set=s, objective=objective, nu=float(doc["nu"]),
                            alpha=float(doc["alpha"]))
    if kind == "permuted":
        w = np.asarray(doc["w"], dtype=np.float64)
        s = WeightedBallSet(
            d=d,
            C=float(doc["C"]),
            w=w,
            W=float(w.sum()),
            perm=np.asarray(doc["perm"], dtype=np.int64),
        )
        return PermutedFamily(d=d, base_set=s, rho=float(doc["rho"]), M=float(doc["M"]))
    if kind == "smoothed":
        return build_smoothed_instance(doc.get("base", "ball"), d, float(doc["beta"]))
    raise ValueError(f"unknown instance kind {kind!r}")
