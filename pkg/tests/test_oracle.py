import itertools
import math

import numpy as np
import pytest

from lmo_hardbench.instances import (
    build_permuted_family,
    diameter,
    optimum_for_permutation,
)
from lmo_hardbench.lmo import contains, eval_constraint, lmo_weighted_ball
from lmo_hardbench.oracle import (
    ResistingOracleState,
    brute_force_matching,
    complete_permutation,
    query_log_to_dicts,
    replay_divergence,
    worst_case_matching,
)


def test_first_assignment_tie_break():
    fam = build_permuted_family(3)
    state = ResistingOracleState(fam)
    state.query(np.array([0.2, -0.5, 0.5]))
    # |p_2| ties |p_3|; the lower coordinate index wins and gets rank 1
    assert state.assigned == {1: 1}


def test_zero_query_returns_zero_and_assigns_nothing():
    fam = build_permuted_family(3)
    state = ResistingOracleState(fam)
    res = state.query(np.zeros(3))
    assert np.array_equal(res.z, np.zeros(3))
    assert res.lam is None
    assert state.assigned == {}
    assert len(state.query_log) == 1


def test_uniform_query_matches_full_lmo_under_any_completion():
    fam = build_permuted_family(3)
    state = ResistingOracleState(fam)
    res = state.query(-np.ones(3))
    assert state.assigned == {0: 1}
    assert res.z[0] > 0
    assert np.all(res.z[1:] == 0.0)
    # brute force: the answer must equal the full LMO for every completion
    for rest in itertools.permutations([2, 3]):
        perm = np.array([1, *rest])
        full = lmo_weighted_ball(fam.set_for(perm), -np.ones(3))
        np.testing.assert_allclose(full.z, res.z, atol=1e-12)


def test_dimension_mismatch_rejected():
    fam = build_permuted_family(3)
    state = ResistingOracleState(fam)
    with pytest.raises(ValueError):
        state.query(np.ones(4))


@pytest.mark.parametrize("d", [4, 8, 16])
def test_zero_chain_on_random_sequences(d):
    fam = build_permuted_family(d)
    rng = np.random.default_rng(d)
    for _ in range(25):
        state = ResistingOracleState(fam)
        for _ in range(d // 2):
            p = rng.standard_normal(d)
            res = state.query(p)
            free = state.unassigned()
            if free:
                assert np.all(res.z[free] == 0.0)
            assert res.constraint_residual <= 1e-12 * fam.base_set.level
        # weights are handed out smallest-first, one per query
        ranks = list(state.assigned.values())
        assert ranks == list(range(1, len(ranks) + 1))


def test_at_most_one_assignment_per_query():
    fam = build_permuted_family(5)
    state = ResistingOracleState(fam)
    sizes = [0]
    rng = np.random.default_rng(0)
    for _ in range(7):
        state.query(rng.standard_normal(5))
        sizes.append(len(state.assigned))
    assert all(b - a <= 1 for a, b in zip(sizes, sizes[1:]))


def test_queries_beyond_dimension_answer_fully_assigned_lmo():
    fam = build_permuted_family(3)
    state = ResistingOracleState(fam)
    rng = np.random.default_rng(4)
    for _ in range(3):
        state.query(rng.standard_normal(3))
    assert len(state.assigned) == 3
    p = rng.standard_normal(3)
    res = state.query(p)
    perm = np.zeros(3, dtype=np.int64)
    for i, r in state.assigned.items():
        perm[i] = r
    full = lmo_weighted_ball(fam.set_for(perm), p)
    np.testing.assert_allclose(res.z, full.z, atol=1e-12)


def _random_partial_state(fam, n_queries, seed):
    state = ResistingOracleState(fam)
    rng = np.random.default_rng(seed)
    for _ in range(n_queries):
        state.query(rng.standard_normal(fam.d))
    return state, rng


@pytest.mark.parametrize("d,q", [(5, 1), (6, 2), (7, 3), (8, 3), (9, 2)])
def test_matching_agrees_with_brute_force(d, q):
    fam = build_permuted_family(d)
    state, rng = _random_partial_state(fam, q, seed=10 * d + q)
    x = rng.standard_normal(d) * 0.05
    perm_fast, val_fast = worst_case_matching(fam, state.assigned, x)
    perm_slow, val_slow = brute_force_matching(fam, state.assigned, x)
    assert abs(val_fast - val_slow) <= 1e-12
    # both permutations must extend the partial assignment
    for i, r in state.assigned.items():
        assert perm_fast[i] == r and perm_slow[i] == r


def test_matching_with_identical_tail_values():
    # symmetric x: every completion certifies the same value
    fam = build_permuted_family(6)
    state, _ = _random_partial_state(fam, 2, seed=3)
    x = 0.01 * np.ones(6)
    _, val_fast = worst_case_matching(fam, state.assigned, x)
    free = [i for i in range(6) if i not in state.assigned]
    remaining = sorted(set(range(1, 7)) - set(state.assigned.values()))
    vals = []
    for ranks in itertools.permutations(remaining):
        targets = fam.rho * (fam.base_set.w[-1] - fam.base_set.w[np.array(ranks) - 1])
        vals.append(float(np.sum((x[free] - targets) ** 2)))
    assert max(vals) - min(vals) <= 1e-15
    assert abs(val_fast - vals[0]) <= 1e-12


def test_completion_on_feasible_point():
    fam = build_permuted_family(8)
    state, _ = _random_partial_state(fam, 3, seed=8)
    x = np.zeros(8)  # the origin is interior for every completion
    comp = complete_permutation(state, x)
    assert comp.feasible
    assert comp.gap >= 0
    assert comp.gap >= comp.certificate - 1e-12
    assert sorted(comp.pi_star.tolist()) == list(range(1, 9))
    assert comp.certified_floor == pytest.approx(
        diameter(fam.base_set) ** 2 / (528 * (len(state.query_log) + 1) ** 2)
    )


def test_completion_flags_infeasible_point():
    fam = build_permuted_family(6)
    state, _ = _random_partial_state(fam, 2, seed=5)
    comp = complete_permutation(state, 10.0 * np.ones(6))
    assert not comp.feasible


def test_gap_is_completion_independent():
    # f(x) is fixed and f at the permuted optimum never depends on which
    # completion is chosen, so the realized gap is matching-invariant
    fam = build_permuted_family(6)
    state, rng = _random_partial_state(fam, 2, seed=12)
    x = rng.standard_normal(6) * 0.02
    obj = fam.objective()
    free = [i for i in range(6) if i not in state.assigned]
    remaining = sorted(set(range(1, 7)) - set(state.assigned.values()))
    base = np.zeros(6, dtype=np.int64)
    for i, r in state.assigned.items():
        base[i] = r
    gaps = []
    for ranks in itertools.permutations(remaining):
        perm = base.copy()
        perm[free] = ranks
        gaps.append(obj.value(x) - obj.value(optimum_for_permutation(fam, perm)))
    assert max(gaps) - min(gaps) <= 1e-15


def test_certificate_dominates_average_and_variance_floor():
    # exact maximization beats the averaged certificate, which itself beats
    # the variance floor used to certify the adversarial bound
    fam = build_permuted_family(7)
    state, rng = _random_partial_state(fam, 2, seed=9)
    x = rng.standard_normal(7) * 0.03
    _, best = worst_case_matching(fam, state.assigned, x)
    free = [i for i in range(7) if i not in state.assigned]
    remaining = sorted(set(range(1, 8)) - set(state.assigned.values()))
    w = fam.base_set.w
    vals = []
    for ranks in itertools.permutations(remaining):
        targets = fam.rho * (w[-1] - w[np.array(ranks) - 1])
        vals.append(float(np.sum((x[free] - targets) ** 2)))
    avg = float(np.mean(vals))
    m = len(free)
    targets_all = fam.rho * (w[-1] - w[np.array(remaining) - 1])
    variance_floor = m * float(np.var(targets_all))
    assert best >= avg - 1e-15
    assert avg >= variance_floor - 1e-15


def test_replay_after_completion():
    fam = build_permuted_family(8)
    state, rng = _random_partial_state(fam, 4, seed=2)
    comp = complete_permutation(state, np.zeros(8))
    assert replay_divergence(state, comp.pi_star) <= 1e-12


def test_gradient_reveals_nothing_about_the_permutation():
    # the objective is assembled from (rho, w_d) alone, before any
    # permutation exists; its gradient is x - M*1 identically
    fam = build_permuted_family(5)
    obj = fam.objective()
    rng = np.random.default_rng(6)
    x = rng.standard_normal(5)
    np.testing.assert_allclose(obj.grad(x), x - fam.M * np.ones(5), atol=0)


def test_query_log_serialization():
    fam = build_permuted_family(4)
    state = ResistingOracleState(fam)
    state.query(np.array([0.0, 0.0, 0.0, 0.0]))
    state.query(np.array([0.1, -0.4, 0.2, 0.0]))
    docs = query_log_to_dicts(state)
    assert len(docs) == 2
    assert docs[0]["lambda"] is None
    assert docs[0]["assignedIndex"] is None
    assert docs[1]["assignedIndex"] == 2  # coordinate indices are 1-based
    assert docs[1]["assignedRank"] == 1
    assert set(docs[1]) == {"p", "z", "lambda", "assignedIndex", "assignedRank"}


def test_brute_force_guard():
    fam = build_permuted_family(12)
    state = ResistingOracleState(fam)
    with pytest.raises(ValueError):
        brute_force_matching(fam, state.assigned, np.zeros(12))
