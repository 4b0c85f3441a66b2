"""Runtime resisting oracle for the permuted hard instances.

The adversary postpones fixing the weight permutation. Each nonzero LMO query
assigns the smallest unhanded weight rank to the unassigned coordinate with
the largest query magnitude, answers the query exactly from that partial
assignment (unassigned coordinates are provably zero in the answer), and only
after the run completes the permutation in the worst possible way for the
method under test.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .instances import (
    BOUNDARY_RTOL,
    PermutedFamily,
    diameter,
    optimum_for_permutation,
)
from .lmo import LmoResult, contains, eval_constraint, soft_threshold, solve_multiplier

# The consistency condition |p_j|/lam <= w_{next rank} holds with exact
# equality for tail-constant queries, so it is asserted with a small
# relative slack.
CONSISTENCY_SLACK = 1e-9

BRUTE_FORCE_LIMIT = 8


@dataclass(frozen=True)
class QueryRecord:
    p: np.ndarray
    z: np.ndarray
    lam: float | None  # None marks the zero-query convention z = 0
    assigned_index: int | None  # 0-based coordinate, None if nothing assigned
    assigned_rank: int | None  # 1-based weight rank


class ResistingOracleState:
    """Mutable per-run adversary state: partial permutation plus query log."""

    def __init__(self, family: PermutedFamily):
        self.family = family
        self.assigned: dict[int, int] = {}  # coordinate (0-based) -> rank (1-based)
        self.query_log: list[QueryRecord] = []

    @property
    def d(self) -> int:
        return self.family.d

    def unassigned(self) -> list[int]:
        return [i for i in range(self.d) if i not in self.assigned]

    def query(self, p: np.ndarray) -> LmoResult:
        """Answer one LMO query, assigning at most one coordinate."""
        p = np.asarray(p, dtype=np.float64)
        if p.shape != (self.d,):
            raise ValueError(f"expected a length-{self.d} vector, got shape {p.shape}")
        if not np.any(p):
            z = np.zeros(self.d)
            self.query_log.append(QueryRecord(p=p.copy(), z=z, lam=None,
                                              assigned_index=None, assigned_rank=None))
            return LmoResult(z=z, lam=None, constraint_residual=0.0)

        free = self.unassigned()
        assigned_index = assigned_rank = None
        if free:
            mags = np.abs(p[free])
            i_star = free[int(np.argmax(mags))]  # argmax ties break to lowest index
            assigned_rank = len(self.assigned) + 1
            assigned_index = i_star
            self.assigned[i_star] = assigned_rank
        z, lam = self._answer(p)
        self._assert_consistency(p, lam)
        rec = QueryRecord(p=p.copy(), z=z, lam=lam,
                          assigned_index=assigned_index,
                          assigned_rank=assigned_rank)
        self.query_log.append(rec)
        resid = self._residual(z)
        return LmoResult(z=z, lam=lam, constraint_residual=resid)

    def _answer(self, p: np.ndarray) -> tuple[np.ndarray, float]:
        """Soft-threshold system restricted to the assigned coordinates;
        unassigned coordinates of the answer are exact zeros."""
        w = self.family.base_set.w
        idx = np.fromiter(self.assigned.keys(), dtype=np.int64)
        ranks = np.fromiter(self.assigned.values(), dtype=np.int64)
        weights = w[ranks - 1]
        lam = solve_multiplier(p[idx], weights, self.family.base_set.level)
        z = np.zeros(self.d)
        z[idx] = soft_threshold(p[idx], lam, weights)
        return z, lam

    def _assert_consistency(self, p: np.ndarray, lam: float) -> None:
        """Every unassigned coordinate must threshold to zero no matter which
        rank it eventually receives; a violation is a bug, surfaced loudly."""
        free = self.unassigned()
        if not free:
            return
        next_weight = self.family.base_set.w[len(self.assigned)]
        worst = float(np.max(np.abs(p[free]))) / lam
        if worst > next_weight * (1.0 + CONSISTENCY_SLACK):
            raise RuntimeError(
                "resisting oracle inconsistency: an unassigned coordinate "
                f"would be active ({worst:.17g} > {next_weight:.17g})"
            )

    def _residual(self, z: np.ndarray) -> float:
        """Boundary residual under any consistent completion (zeros off the
        assigned coordinates make the constraint value completion-free)."""
        w = self.family.base_set.w
        idx = np.fromiter(self.assigned.keys(), dtype=np.int64)
        ranks = np.fromiter(self.assigned.values(), dtype=np.int64)
        val = 0.5 * float(np.dot(z, z)) + float(np.dot(w[ranks - 1], np.abs(z[idx])))
        return abs(val - self.family.base_set.level)


@dataclass(frozen=True)
class CompletionResult:
    pi_star: np.ndarray  # full permutation, coordinate -> rank (1-based)
    x_final: np.ndarray
    feasible: bool
    gap: float  # f(x_T) - f(x_star^{pi_star}); meaningful only when feasible
    certified_floor: float
    certificate: float  # 0.5 * max over completions of the squared tail mismatch


def worst_case_matching(
    family: PermutedFamily, assigned: dict[int, int], x: np.ndarray
) -> tuple[np.ndarray, float]:
    """Complete the permutation maximizing sum_j (x_j - rho*(w_d - w_rank(j)))^2
    over the unassigned coordinates.

    The sum expands to a constant minus 2 * sum_j x_j * target_{match(j)}, so
    the exact maximizer pairs tail values of x sorted ascending with targets
    sorted descending; targets decrease with rank, hence ascending x gets
    ascending remaining ranks.
    """
    d = family.d
    w = family.base_set.w
    free = np.array([i for i in range(d) if i not in assigned], dtype=np.int64)
    remaining = np.array(
        sorted(set(range(1, d + 1)) - set(assigned.values())), dtype=np.int64
    )
    perm = np.zeros(d, dtype=np.int64)
    for i, r in assigned.items():
        perm[i] = r
    if free.size:
        order = np.argsort(x[free], kind="stable")
        perm[free[order]] = remaining
    targets = family.rho * (w[-1] - w[perm[free] - 1])
    cert_sum = float(np.sum((x[free] - targets) ** 2))
    return perm, cert_sum


def brute_force_matching(
    family: PermutedFamily, assigned: dict[int, int], x: np.ndarray
) -> tuple[np.ndarray, float]:
    """Exhaustive completion maximizer; the independent check for the
    sorting-based matching, limited to small tails."""
    d = family.d
    w = family.base_set.w
    free = [i for i in range(d) if i not in assigned]
    remaining = sorted(set(range(1, d + 1)) - set(assigned.values()))
    if len(free) > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_LIMIT} free coordinates")
    best_sum = -math.inf
    best_perm = None
    base = np.zeros(d, dtype=np.int64)
    for i, r in assigned.items():
        base[i] = r
    for ranks in itertools.permutations(remaining):
        perm = base.copy()
        perm[free] = ranks
        targets = family.rho * (w[-1] - w[np.asarray(ranks) - 1])
        val = float(np.sum((x[free] - targets) ** 2))
        if val > best_sum:
            best_sum = val
            best_perm = perm
    return best_perm, best_sum


def complete_permutation(
    state: ResistingOracleState,
    x_final: np.ndarray,
    iterations: int | None = None,
    feasibility_tol: float = BOUNDARY_RTOL,
) -> CompletionResult:
    """Worst-case completion after the run.

    The certified floor is (1/528) * diam(S)^2 / (T+1)^2 with T the number of
    oracle queries (the family objective has L = 1).
    """
    x_final = np.asarray(x_final, dtype=np.float64)
    family = state.family
    T = len(state.query_log) if iterations is None else iterations
    perm, cert_sum = worst_case_matching(family, state.assigned, x_final)
    s_pi = family.set_for(perm)
    feasible = contains(s_pi, x_final, feasibility_tol)
    objective = family.objective()
    x_opt = optimum_for_permutation(family, perm)
    gap = objective.value(x_final) - objective.value(x_opt)
    diam = diameter(family.base_set)
    floor = diam * diam / (528.0 * (T + 1) ** 2)
    return CompletionResult(
        pi_star=perm,
        x_final=x_final.copy(),
        feasible=feasible,
        gap=gap,
        certified_floor=floor,
        certificate=0.5 * cert_sum,
    )


def replay_divergence(state: ResistingOracleState, perm: np.ndarray) -> float:
    """Max elementwise gap between logged answers and the full LMO under the
    completed permutation (zero queries compare against z = 0)."""
    from .lmo import lmo_weighted_ball

    s_pi = state.family.set_for(perm)
    worst = 0.0
    for rec in state.query_log:
        if rec.lam is None:
            worst = max(worst, float(np.max(np.abs(rec.z))))
            continue
        full = lmo_weighted_ball(s_pi, rec.p)
        worst = max(worst, float(np.max(np.abs(full.z - rec.z))))
    return worst


def query_log_to_dicts(state: ResistingOracleState) -> list[dict]:
    """JSON-ready replay log; coordinate indices are reported 1-based."""
    out = []
    for rec in state.query_log:
        out.append(
            {
                "p": rec.p.tolist(),
                "z": rec.z.tolist(),
                "lambda": rec.lam,
                "assignedIndex": None if rec.assigned_index is None else rec.assigned_index + 1,
                "assignedRank": rec.assigned_rank,
            }
        )
    return out
