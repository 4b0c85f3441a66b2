import math

import numpy as np
import pytest

from lmo_hardbench.algorithms import (
    VARIANTS,
    MethodSpec,
    away_pairwise_update,
    fully_corrective_step,
    line_search_step,
    run_on_hard_instance,
    run_on_smoothed,
    run_resisting,
)
from lmo_hardbench.harness import check_certificates, trajectory_rows
from lmo_hardbench.instances import (
    QuadraticObjective,
    build_hard_instance,
    build_permuted_family,
    build_smoothed_instance,
)
from lmo_hardbench.lmo import ZeroQueryError, contains

MONOTONE_VARIANTS = ("line-search", "away-step", "pairwise", "fully-corrective")


def golden_section(f, lo, hi, tol=1e-12):
    phi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    while b - a > tol:
        if f(c) < f(d):
            b, d = d, c
            c = b - phi * (b - a)
        else:
            a, c = c, d
            d = a + phi * (b - a)
    return 0.5 * (a + b)


def test_line_search_interpolates_optimum():
    obj = QuadraticObjective(L=1.0, x_star=np.array([0.5, 0.5]))
    x = np.zeros(2)
    z = np.ones(2)
    theta = line_search_step(x, z, obj)
    x_next = x + theta * (z - x)
    assert obj.value(x_next) == pytest.approx(0.0, abs=1e-16)


def test_line_search_endpoint_optimum():
    obj = QuadraticObjective(L=3.0, x_star=np.array([1.0, 2.0]))
    x = np.zeros(2)
    z = np.array([1.0, 2.0])
    assert line_search_step(x, z, obj) == 1.0
    assert line_search_step(x, x, obj) == 0.0


def test_line_search_matches_golden_section():
    # golden section cannot localize a quadratic argmin below ~sqrt(eps),
    # so the abscissa check runs at the oracle's own resolution while the
    # value-level check is tight
    rng = np.random.default_rng(42)
    for _ in range(25):
        x = rng.standard_normal(4)
        z = rng.standard_normal(4)
        obj = QuadraticObjective(L=float(rng.uniform(0.5, 3.0)),
                                 x_star=rng.standard_normal(4))
        theta = line_search_step(x, z, obj)
        seg = lambda t: obj.value(x + t * (z - x))
        ref = golden_section(seg, 0.0, 1.0)
        assert theta == pytest.approx(ref, abs=1e-7)
        assert seg(theta) <= seg(ref) + 1e-12


def test_trajectory_shape_and_columns():
    inst = build_hard_instance(6)
    traj = run_on_hard_instance(inst, MethodSpec("open-loop"), 3)
    assert [r.k for r in traj.records] == [0, 1, 2, 3]
    assert len(traj.atoms) == 4  # x0 plus one LMO answer per iteration
    rows = trajectory_rows(traj)
    assert list(rows[0]) == ["k", "gap", "step", "support", "conv_resid", "span_resid"]
    assert rows[0]["step"] is None
    assert rows[1]["step"] == pytest.approx(1.0)  # theta_0 = 2/(0+2)


def test_open_loop_weights_follow_schedule():
    inst = build_hard_instance(5)
    traj = run_on_hard_instance(inst, MethodSpec("open-loop"), 4)
    # closed form of the open-loop hull weights: competitor reconstruction
    thetas = [2.0 / (k + 2.0) for k in range(4)]
    x = np.zeros(5)
    for theta, rec in zip(thetas, traj.records[1:]):
        x = x + theta * (rec.z - x)
    np.testing.assert_allclose(x, traj.records[-1].x, atol=1e-15)
    coeffs = traj.records[-1].convex_coeffs
    assert coeffs.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("variant", VARIANTS)
def test_certificates_hold_for_every_variant(variant):
    inst = build_hard_instance(8)
    traj = run_on_hard_instance(inst, MethodSpec(variant), 6)
    certs = check_certificates(traj)
    assert certs["ok"], certs
    assert certs["max_conv_resid"] <= 1e-10 * traj.problem.diam
    assert certs["max_span_rel_resid"] <= 1e-10
    assert certs["min_coeff"] >= -1e-14
    assert certs["iterates_feasible"]


@pytest.mark.parametrize("variant", VARIANTS)
def test_iterates_feasible(variant):
    inst = build_hard_instance(6)
    traj = run_on_hard_instance(inst, MethodSpec(variant), 5)
    for rec in traj.records:
        assert contains(inst.set, rec.x, tol=1e-10)


@pytest.mark.parametrize("variant", MONOTONE_VARIANTS)
def test_gap_monotone_for_descent_variants(variant):
    inst = build_hard_instance(10)
    traj = run_on_hard_instance(inst, MethodSpec(variant), 8)
    gaps = traj.gaps()
    assert all(b <= a * (1 + 1e-12) for a, b in zip(gaps, gaps[1:]))


@pytest.mark.parametrize("variant", VARIANTS)
def test_support_growth_is_a_zero_chain(variant):
    inst = build_hard_instance(20)
    traj = run_on_hard_instance(inst, MethodSpec(variant), 9)
    for rec in traj.records[1:]:
        k = rec.k
        assert np.all(rec.x[k:] == 0.0)
        assert np.all(rec.z[k:] == 0.0)


def test_away_with_single_atom_takes_fw_step():
    # at the starting point the only active atom is x0, the away direction
    # vanishes, and the decision rule must fall through to a plain FW step
    inst = build_hard_instance(4)
    obj = inst.objective
    x = np.zeros(4)
    atoms = [x.copy()]
    weights = [1.0]
    g = obj.grad(x)
    from lmo_hardbench.lmo import lmo_weighted_ball

    z = lmo_weighted_ball(inst.set, g).z
    atoms.append(z)
    weights.append(0.0)
    x_new, theta = away_pairwise_update(atoms, weights, x, g, 1, obj, mode="away")
    assert theta > 0
    np.testing.assert_allclose(x_new, theta * z, atol=1e-15)
    assert weights[0] == pytest.approx(1 - theta, abs=1e-15)


def test_pairwise_conserves_weight():
    inst = build_hard_instance(6)
    traj = run_on_hard_instance(inst, MethodSpec("pairwise"), 6)
    for rec in traj.records:
        assert rec.convex_coeffs.sum() == pytest.approx(1.0, abs=1e-12)
        assert rec.convex_coeffs.min() >= -1e-14


def test_fully_corrective_single_atom():
    obj = QuadraticObjective(L=1.0, x_star=np.array([5.0, 5.0]))
    atom = np.array([1.0, 0.0])
    weights = [1.0]
    y = fully_corrective_step([atom], weights, obj, inner_budget=10)
    np.testing.assert_array_equal(y, atom)


def test_fully_corrective_two_atoms_matches_segment_minimizer():
    rng = np.random.default_rng(3)
    for _ in range(10):
        a = rng.standard_normal(3)
        b = rng.standard_normal(3)
        obj = QuadraticObjective(L=1.0, x_star=rng.standard_normal(3))
        weights = [1.0, 0.0]
        y = fully_corrective_step([a, b], weights, obj, inner_budget=200)
        theta = line_search_step(a, b, obj)
        np.testing.assert_allclose(y, a + theta * (b - a), atol=1e-10)


def test_fully_corrective_inner_monotone():
    inst = build_hard_instance(8)
    obj = inst.objective
    rng = np.random.default_rng(8)
    from lmo_hardbench.lmo import lmo_weighted_ball

    atoms = [np.zeros(8)] + [
        lmo_weighted_ball(inst.set, rng.standard_normal(8)).z for _ in range(4)
    ]
    weights = [1.0] + [0.0] * 4
    vals = []
    y = np.zeros(8)
    for budget in range(1, 8):
        w = [1.0] + [0.0] * 4
        y = fully_corrective_step(atoms, w, obj, inner_budget=budget)
        vals.append(obj.value(y))
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))


def test_short_step_equals_line_search_on_quadratics():
    inst = build_hard_instance(8)
    t1 = run_on_hard_instance(inst, MethodSpec("line-search"), 5)
    t2 = run_on_hard_instance(inst, MethodSpec("short-step"), 5)
    np.testing.assert_array_equal(t1.records[-1].x, t2.records[-1].x)


def test_zero_gradient_raises():
    # a problem whose unconstrained minimizer is the starting point produces
    # the excluded zero query immediately
    from lmo_hardbench.algorithms import Problem, run_method
    from lmo_hardbench.instances import build_weighted_ball, diameter
    from lmo_hardbench.lmo import lmo_weighted_ball

    s = build_weighted_ball(3)
    degenerate = Problem(
        label="degenerate",
        kind="hard",
        d=3,
        objective=QuadraticObjective(L=1.0, x_star=np.zeros(3)),
        lmo=lambda p: lmo_weighted_ball(s, p).z,
        f_star=0.0,
        diam=diameter(s),
        contains_fn=None,
    )
    with pytest.raises(ZeroQueryError):
        run_method(degenerate, MethodSpec("line-search"), 2)


def test_budget_validation():
    inst = build_hard_instance(4)
    with pytest.raises(ValueError):
        run_on_hard_instance(inst, MethodSpec("open-loop"), 0)
    with pytest.raises(ValueError):
        MethodSpec("momentum")


def test_resisting_run_backfills_gaps():
    fam = build_permuted_family(8)
    traj, state = run_resisting(fam, MethodSpec("open-loop"), 3)
    assert traj.completion is not None
    assert all(r.gap is not None for r in traj.records)
    assert traj.final_gap == pytest.approx(traj.completion.gap, abs=1e-15)
    assert len(state.query_log) == 3


@pytest.mark.parametrize("variant", VARIANTS)
def test_smoothed_runs_have_certificates(variant):
    sm = build_smoothed_instance("ball", 8, 50.0)
    traj = run_on_smoothed(sm, MethodSpec(variant), 4)
    certs = check_certificates(traj)
    assert certs["ok"], certs
