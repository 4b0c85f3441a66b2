"""Deterministic span methods driven by first-order and LMO oracles.

Every variant queries the gradient at the current iterate, sends it to the
LMO, and keeps the next iterate inside the convex hull of the starting point
and all LMO answers. Each iteration logs enough bookkeeping (hull weights,
search-direction representation) for the harness to verify the hull and span
certificates by plain linear algebra.

Methods see only oracle outputs: objective values, gradients, the smoothness
constant, and LMO answers. They never touch the minimizer or set internals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .instances import (
    HardInstance,
    PermutedFamily,
    QuadraticObjective,
    SimplexSet,
    SmoothedInstance,
    diameter,
    optimum_for_permutation,
)
from .lmo import (
    ZeroQueryError,
    contains,
    lmo_minkowski,
    lmo_weighted_ball,
    smoothed_contains,
)
from .oracle import CompletionResult, ResistingOracleState, complete_permutation

VARIANTS = (
    "open-loop",
    "line-search",
    "short-step",
    "away-step",
    "pairwise",
    "fully-corrective",
)

# Active-set weights below this are discarded to keep certificates
# well-conditioned.
WEIGHT_DROP_TOL = 1e-14

INNER_GAP_TOL = 1e-12
DEFAULT_INNER_BUDGET = 50
DEFAULT_OPEN_LOOP_OFFSET = 2.0


@dataclass(frozen=True)
class MethodSpec:
    variant: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.variant == "open-loop":
            off = self.params.get("offset", DEFAULT_OPEN_LOOP_OFFSET)
            if off <= 0:
                raise ValueError("open-loop offset must be positive")
        if self.variant == "fully-corrective":
            budget = self.params.get("inner_budget", DEFAULT_INNER_BUDGET)
            if int(budget) < 1:
                raise ValueError("inner budget must be a positive integer")


@dataclass
class IterationRecord:
    k: int
    x: np.ndarray
    f_value: float
    gap: Optional[float]
    convex_coeffs: np.ndarray  # weights over [x0, z_1, ..., z_k]
    support_size: int
    p: Optional[np.ndarray] = None  # query that produced x_k (k >= 1)
    z: Optional[np.ndarray] = None
    theta: Optional[float] = None
    span_coeffs: Optional[dict] = None  # generator label -> coefficient


@dataclass(frozen=True)
class Problem:
    """Oracle bundle a method is allowed to see, plus verification metadata."""

    label: str
    kind: str  # "hard" | "smoothed" | "resisting"
    d: int
    objective: QuadraticObjective
    lmo: Callable[[np.ndarray], np.ndarray]
    f_star: Optional[float]
    diam: float
    contains_fn: Optional[Callable[[np.ndarray, float], bool]]
    beta: Optional[float] = None
    instance: object = None


@dataclass
class Trajectory:
    method: MethodSpec
    problem: Problem
    records: list[IterationRecord]
    atoms: list[np.ndarray]  # [x0, z_1, ..., z_T]
    completion: Optional[CompletionResult] = None

    @property
    def T(self) -> int:
        return len(self.records) - 1

    @property
    def final_gap(self) -> Optional[float]:
        return self.records[-1].gap

    def gaps(self) -> list[Optional[float]]:
        return [r.gap for r in self.records]


def problem_from_hard_instance(inst: HardInstance) -> Problem:
    return Problem(
        label=f"hard(d={inst.d},L={inst.objective.L:g},alpha={inst.alpha:g})",
        kind="hard",
        d=inst.d,
        objective=inst.objective,
        lmo=lambda p: lmo_weighted_ball(inst.set, p).z,
        f_star=0.0,
        diam=diameter(inst.set),
        contains_fn=lambda x, tol: contains(inst.set, x, tol),
        instance=inst,
    )


def problem_from_smoothed(sm: SmoothedInstance) -> Problem:
    base = "simplex" if isinstance(sm.base, SimplexSet) else "ball"
    return Problem(
        label=f"smoothed({base},d={sm.d},beta={sm.beta:g})",
        kind="smoothed",
        d=sm.d,
        objective=sm.objective,
        lmo=lambda p: lmo_minkowski(sm, p),
        f_star=0.0,
        diam=sm.diameter,
        contains_fn=lambda x, tol: smoothed_contains(sm, x, tol),
        beta=sm.beta,
        instance=sm,
    )


def problem_from_resisting(state: ResistingOracleState) -> Problem:
    family = state.family
    return Problem(
        label=f"resisting(d={family.d})",
        kind="resisting",
        d=family.d,
        objective=family.objective(),
        lmo=lambda p: state.query(p).z,
        f_star=None,  # fixed only after the permutation is completed
        diam=diameter(family.base_set),
        contains_fn=None,
        instance=state,
    )


def line_search_step(x: np.ndarray, z: np.ndarray, objective: QuadraticObjective) -> float:
    """Exact minimizer of f on the segment [x, z], clamped to [0, 1].

    For the quadratic objective the segment restriction has curvature
    L*||x - z||^2, so the minimizer is available from one gradient."""
    diff = x - z
    denom = objective.L * float(np.dot(diff, diff))
    if denom == 0.0:
        return 0.0
    theta = float(np.dot(objective.grad(x), diff)) / denom
    return min(1.0, max(0.0, theta))


def _clamped_step(g: np.ndarray, direction: np.ndarray, L: float, cap: float) -> float:
    denom = L * float(np.dot(direction, direction))
    if denom == 0.0:
        return 0.0
    theta = float(np.dot(-g, direction)) / denom
    return min(cap, max(0.0, theta))


def _drop_tiny(weights: list[float]) -> None:
    for j, wj in enumerate(weights):
        if 0.0 < wj < WEIGHT_DROP_TOL:
            weights[j] = 0.0


def _merge_index(atoms: list[np.ndarray], weights: list[float], z_index: int) -> int:
    """Reuse an active atom identical to the newest LMO answer, so drop-step
    caps see the full mass held by that point."""
    z = atoms[z_index]
    for j in range(z_index):
        if weights[j] > 0.0 and np.array_equal(atoms[j], z):
            return j
    return z_index


def _away_index(atoms: list[np.ndarray], weights: list[float], g: np.ndarray) -> int:
    best, best_score = -1, -math.inf
    for j, wj in enumerate(weights):
        if wj > 0.0:
            score = float(np.dot(g, atoms[j]))
            if score > best_score:
                best, best_score = j, score
    if best < 0:
        raise ValueError("empty active set")
    return best


def away_pairwise_update(
    atoms: list[np.ndarray],
    weights: list[float],
    x: np.ndarray,
    g: np.ndarray,
    z_index: int,
    objective: QuadraticObjective,
    mode: str,
) -> tuple[np.ndarray, float]:
    """One away-step or pairwise update. Mutates weights in place and returns
    the new iterate and the step size taken."""
    target = _merge_index(atoms, weights, z_index)
    z = atoms[z_index]
    away = _away_index(atoms, weights, g)
    a = atoms[away]
    if mode == "pairwise":
        direction = z - a
        cap = weights[away]
        theta = _clamped_step(g, direction, objective.L, cap)
        weights[away] -= theta
        weights[target] += theta
        if weights[away] < WEIGHT_DROP_TOL:
            weights[away] = 0.0 if away != target else weights[away]
        x_new = x + theta * direction
    elif mode == "away":
        fw_dir = z - x
        away_dir = x - a
        if float(np.dot(-g, fw_dir)) >= float(np.dot(-g, away_dir)):
            theta = _clamped_step(g, fw_dir, objective.L, 1.0)
            for j in range(len(weights)):
                weights[j] *= 1.0 - theta
            weights[target] += theta
            x_new = x + theta * fw_dir
        else:
            alpha = weights[away]
            cap = alpha / (1.0 - alpha) if alpha < 1.0 else math.inf
            theta = _clamped_step(g, away_dir, objective.L, cap)
            for j in range(len(weights)):
                weights[j] *= 1.0 + theta
            weights[away] -= theta
            if weights[away] < WEIGHT_DROP_TOL:
                weights[away] = 0.0
            x_new = x + theta * away_dir
    else:
        raise ValueError(f"unknown mode {mode!r}")
    _drop_tiny(weights)
    return x_new, theta


def fully_corrective_step(
    atoms: list[np.ndarray],
    weights: list[float],
    objective: QuadraticObjective,
    inner_budget: int,
) -> np.ndarray:
    """Approximately minimize f over conv(atoms) by conditional gradient on
    the weight simplex, warm-started from the current weights.

    Mutates weights in place; stops early once the inner duality gap falls
    below INNER_GAP_TOL. The inner loop only picks among known atoms, so it
    makes no LMO calls."""
    if not atoms:
        raise ValueError("empty atom set")
    A = np.stack(atoms)
    mu = np.asarray(weights, dtype=np.float64)
    y = mu @ A
    for _ in range(int(inner_budget)):
        gy = objective.grad(y)
        scores = A @ gy
        s = int(np.argmin(scores))
        inner_gap = float(np.dot(gy, y) - scores[s])
        if inner_gap <= INNER_GAP_TOL:
            break
        direction = A[s] - y
        theta = _clamped_step(gy, direction, objective.L, 1.0)
        if theta == 0.0:
            break
        mu *= 1.0 - theta
        mu[s] += theta
        y = mu @ A
    weights[:] = mu.tolist()
    return y


def run_method(problem: Problem, method: MethodSpec, T: int) -> Trajectory:
    """Run T iterations from x0 = 0; one gradient and one LMO query each.

    A zero search direction is a contract violation of the method class and
    propagates as ZeroQueryError.
    """
    if T < 1:
        raise ValueError("iteration budget T must be >= 1")
    objective = problem.objective
    d = problem.d
    x = np.zeros(d)
    atoms: list[np.ndarray] = [x.copy()]
    weights: list[float] = [1.0]

    def make_record(k, x, p=None, z=None, theta=None, span=None):
        fv = objective.value(x)
        gap = None if problem.f_star is None else fv - problem.f_star
        return IterationRecord(
            k=k,
            x=x.copy(),
            f_value=fv,
            gap=gap,
            convex_coeffs=np.asarray(weights, dtype=np.float64),
            support_size=int(np.count_nonzero(x)),
            p=p,
            z=z,
            theta=theta,
            span_coeffs=span,
        )

    records = [make_record(0, x)]
    variant = method.variant
    offset = float(method.params.get("offset", DEFAULT_OPEN_LOOP_OFFSET))
    inner_budget = int(method.params.get("inner_budget", DEFAULT_INNER_BUDGET))

    for t in range(T):
        g = objective.grad(x)
        if not np.any(g):
            raise ZeroQueryError()
        p = g.copy()
        z = problem.lmo(p)
        atoms.append(z.copy())
        weights.append(0.0)
        z_index = len(atoms) - 1

        if variant == "open-loop":
            theta = offset / (t + offset)
            for j in range(len(weights)):
                weights[j] *= 1.0 - theta
            weights[z_index] += theta
            x = x + theta * (z - x)
        elif variant in ("line-search", "short-step"):
            # for L-quadratics the short step and the exact segment
            # minimizer coincide; both are kept as distinct entry points
            theta = line_search_step(x, z, objective)
            for j in range(len(weights)):
                weights[j] *= 1.0 - theta
            weights[z_index] += theta
            x = x + theta * (z - x)
        elif variant == "away-step":
            x, theta = away_pairwise_update(
                atoms, weights, x, g, z_index, objective, mode="away"
            )
        elif variant == "pairwise":
            x, theta = away_pairwise_update(
                atoms, weights, x, g, z_index, objective, mode="pairwise"
            )
        else:  # fully-corrective
            x = fully_corrective_step(atoms, weights, objective, inner_budget)
            theta = math.nan

        records.append(
            make_record(t + 1, x, p=p, z=z.copy(), theta=theta,
                        span={f"grad{t}": 1.0})
        )

    return Trajectory(method=method, problem=problem, records=records, atoms=atoms)


def run_on_hard_instance(inst: HardInstance, method: MethodSpec, T: int) -> Trajectory:
    return run_method(problem_from_hard_instance(inst), method, T)


def run_on_smoothed(sm: SmoothedInstance, method: MethodSpec, T: int) -> Trajectory:
    return run_method(problem_from_smoothed(sm), method, T)


def run_resisting(
    family: PermutedFamily, method: MethodSpec, T: int
) -> tuple[Trajectory, ResistingOracleState]:
    """Run against the resisting oracle, then complete the permutation
    worst-case and backfill the gap column."""
    state = ResistingOracleState(family)
    traj = run_method(problem_from_resisting(state), method, T)
    completion = complete_permutation(state, traj.records[-1].x, iterations=T)
    f_opt = family.objective().value(
        optimum_for_permutation(family, completion.pi_star)
    )
    for rec in traj.records:
        rec.gap = rec.f_value - f_opt
    traj.completion = completion
    return traj, state
