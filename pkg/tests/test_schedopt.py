import numpy as np
import pytest

from ptosched.core import InputError, ScheduleMatrix, validate_schedule
from ptosched.schedopt import (
    InfeasibleInstanceError,
    ScheduleModel,
    build_constraints,
    build_objectives,
    cfte_targets,
    goal_values,
    solve_lexicographic,
    solve_weighted,
)

import oracles
from conftest import FakeGrid, make_instance, random_toy


def test_single_clinician_forced_solution():
    inst = make_instance([1.0], [[1, 1]])
    sol = solve_lexicographic(inst, FakeGrid(np.ones((1, 2))))
    assert sol.schedule.entries[0, 0].tolist() == [1, 1]
    assert sol.objective_values["z1"] == 0
    assert sol.objective_values["z3"] == pytest.approx(2.0)
    assert sol.proved_optimal


def test_prev_absent_builds_three_goals():
    inst = make_instance([0.5, 0.5], [[1, 1]])
    assert set(build_objectives(inst).goals) == {1, 2, 3}
    assert set(build_objectives(inst, prev=ScheduleMatrix.zeros(inst.shape)).goals) == {1, 2, 3, 4}
    sol = solve_lexicographic(inst)
    assert [s.goal for s in sol.stages] == [1, 2, 3]
    assert sol.objective_values["z4"] is None


def test_uniform_instance_has_zero_equity_optimum():
    # 4 clinicians, 2 types, each type needs 2 per day: every clinician can hold the mean share
    inst = make_instance([0.5] * 4, [[2] * 4, [2] * 4])
    sol = solve_lexicographic(inst)
    assert sol.stage(2).optimum == pytest.approx(0.0, abs=1e-9)


def test_linearized_cfte_goal_matches_direct_value():
    inst = make_instance([0.5, 1.0], [[1, 1]])
    sm = ScheduleModel(inst)
    build_constraints(inst, None, sm)
    build_objectives(inst, None, None, sm)
    rng = np.random.default_rng(0)
    targets = cfte_targets(inst)
    for _ in range(10):
        b = rng.integers(0, 2, inst.shape).astype(np.int8)
        x = sm.point_from(ScheduleMatrix(b))
        direct = np.abs(b.sum(axis=(1, 2)) - targets).sum()
        assert sm.goals[1].stage_value(x) == pytest.approx(direct)


def test_constraint_counts_match_hand_count():
    # 3 clinicians, 2 shift types, 2 days, one masked clinician-day, one weekend day
    inst = make_instance([0.5, 0.5, 0.5], [[1, 0, 0], [1, 0, 0]], weekend=(1, 2))
    inst2 = make_instance([0.5, 0.5, 0.5], [[1, 1], [1, 0]])
    mask = np.ones((3, 2), dtype=np.int8)
    mask[0, 1] = 0
    cs = build_constraints(inst2, FakeGrid(np.ones((3, 2)), mask))
    I, S, D = 3, 2, 2
    assert cs.counts == {
        "demand": S * D, "one_shift_per_day": I * D, "workload": 2 * I,
        "availability": S * 1, "weekend": 0,
    }
    assert build_constraints(inst).counts["weekend"] == 3


def test_all_masked_clinician_with_floor_is_infeasible():
    inst = make_instance([0.5, 0.5], [[1, 1]], lb=[1, 0])
    mask = np.ones((2, 2), dtype=np.int8)
    mask[0, :] = 0
    with pytest.raises(InfeasibleInstanceError) as err:
        solve_lexicographic(inst, FakeGrid(np.ones((2, 2)), mask))
    conds = {r["condition"] for r in err.value.report}
    assert "workload_vs_availability" in conds
    rep = [r for r in err.value.report if r["condition"] == "workload_vs_availability"][0]
    assert set(rep["constraints"]) == {"workload", "availability"}


def test_overbooked_day_is_reported():
    inst = make_instance([0.5], [[1], [1]])
    with pytest.raises(InfeasibleInstanceError) as err:
        solve_lexicographic(inst)
    assert any(r["condition"] == "daily_headcount" for r in err.value.report)


@pytest.mark.parametrize("seed", range(6))
def test_schedules_are_valid_and_pairs_exact(seed):
    rng = np.random.default_rng(seed)
    inst = random_toy(rng, 4, 2, 5)
    p = rng.uniform(0, 1, (4, 5))
    prev = ScheduleMatrix(rng.integers(0, 2, inst.shape).astype(np.int8))
    sol = solve_lexicographic(inst, FakeGrid(p), prev)
    assert validate_schedule(sol.schedule, inst).ok
    for s in sol.stages:
        assert min(s.deviations) == 0.0
    # coverage is a hard equality
    assert np.array_equal(sol.schedule.entries.sum(axis=0), inst.demand)


@pytest.mark.parametrize("seed", range(8))
def test_priority_matches_enumeration(seed):
    rng = np.random.default_rng(100 + seed)
    inst = random_toy(rng, 2, 2, 3)  # 12 assignment variables
    p = np.round(rng.uniform(0, 1, (2, 3)), 3)
    prev = rng.integers(0, 2, inst.shape)
    vecs = [oracles.goal_vector(b, inst, p, prev) for b in oracles.feasible_schedules(inst)]
    best, _ = oracles.lex_min(vecs, [0, 1, 2, 3])
    sol = solve_lexicographic(inst, FakeGrid(p), ScheduleMatrix(prev.astype(np.int8)))
    got = oracles.goal_vector(sol.schedule.entries, inst, p, prev)
    assert got[0] == best[0]
    assert got[1] == pytest.approx(best[1], abs=1e-9)
    assert got[2] == pytest.approx(best[2], abs=1e-6)
    assert got[3] == best[3]


def test_custom_rank_order():
    rng = np.random.default_rng(42)
    inst = random_toy(rng, 2, 2, 3)
    p = np.round(rng.uniform(0, 1, (2, 3)), 3)
    sol = solve_lexicographic(inst, FakeGrid(p), ranks=[3, 1, 2])
    vecs = [oracles.goal_vector(b, inst, p, None) for b in oracles.feasible_schedules(inst)]
    best, _ = oracles.lex_min(vecs, [2, 0, 1])
    assert [s.goal for s in sol.stages] == [3, 1, 2]
    assert -sol.stage(3).optimum == pytest.approx(-best[0], abs=1e-6)
    assert sol.stage(1).optimum == pytest.approx(best[1])


def test_weighted_single_goal_equals_lex_stage_one():
    rng = np.random.default_rng(8)
    inst = random_toy(rng, 3, 2, 4)
    p = rng.uniform(0, 1, (3, 4))
    lex = solve_lexicographic(inst, FakeGrid(p))
    w = solve_weighted(inst, FakeGrid(p), weights=(1, 0, 0, 0))
    assert w.stage(1).optimum == pytest.approx(lex.stage(1).optimum)


def test_weighted_equal_weights_matches_brute_force():
    rng = np.random.default_rng(21)
    inst = random_toy(rng, 2, 2, 3)
    p = np.round(rng.uniform(0, 1, (2, 3)), 3)
    prev = rng.integers(0, 2, inst.shape)
    sol = solve_weighted(inst, FakeGrid(p), ScheduleMatrix(prev.astype(np.int8)), (1, 1, 1, 1))
    # d3- is aspiration - z3: constant shift of -z3, so minimizing the sum of g-vector entries is equivalent
    totals = [sum(v) for v in (oracles.goal_vector(b, inst, p, prev)
                               for b in oracles.feasible_schedules(inst))]
    got = sum(oracles.goal_vector(sol.schedule.entries, inst, p, prev))
    assert got == pytest.approx(min(totals), abs=1e-6)


def test_weight_scaling_preserves_argmin_value():
    rng = np.random.default_rng(4)
    inst = random_toy(rng, 3, 2, 3)
    p = rng.uniform(0, 1, (3, 3))
    a = solve_weighted(inst, FakeGrid(p), weights=(1, 2, 1, 0))
    b = solve_weighted(inst, FakeGrid(p), weights=(3, 6, 3, 0))
    va = oracles.goal_vector(a.schedule.entries, inst, p, None)
    vb = oracles.goal_vector(b.schedule.entries, inst, p, None)
    assert va[0] + 2 * va[1] + va[2] == pytest.approx(vb[0] + 2 * vb[1] + vb[2], abs=1e-6)


def test_weighted_rejects_bad_weights():
    inst = make_instance([0.5], [[1]])
    with pytest.raises(InputError):
        solve_weighted(inst, weights=(0, 0, 0, 0))
    with pytest.raises(InputError):
        solve_weighted(inst, weights=(1, -1, 0, 0))


def test_grid_and_prev_dimension_checks():
    inst = make_instance([0.5, 0.5], [[1, 1]])
    with pytest.raises(InputError):
        solve_lexicographic(inst, FakeGrid(np.ones((3, 2))))
    with pytest.raises(InputError):
        build_objectives(inst, prev=ScheduleMatrix.zeros((2, 2, 2)))


def test_raising_probability_of_assigned_cell_keeps_z3_monotone():
    rng = np.random.default_rng(13)
    inst = random_toy(rng, 3, 1, 4)
    p = rng.uniform(0.1, 0.9, (3, 4))
    sol = solve_lexicographic(inst, FakeGrid(p))
    i, _, t = map(int, np.argwhere(sol.schedule.entries == 1)[0])
    p2 = p.copy()
    p2[i, t] = 1.0
    sol2 = solve_lexicographic(inst, FakeGrid(p2))
    assert sol2.objective_values["z3"] >= sol.objective_values["z3"] - 1e-9


def test_solution_report_schema():
    inst = make_instance([0.5, 0.5], [[1, 1]])
    rep = solve_lexicographic(inst).report()
    assert set(rep) == {"mode", "stages", "objective_values"}
    for s in rep["stages"]:
        assert {"goal", "rank", "optimum", "deviations", "proved_optimal", "wall_ms"} <= set(s)
    assert set(rep["objective_values"]) == {"z1", "z2", "z3", "z4"}


def test_goal_values_direct():
    inst = make_instance([0.5, 0.5], [[1, 1]])
    b = np.zeros(inst.shape, dtype=np.int8)
    b[0, 0, 0] = b[1, 0, 1] = 1
    gv = goal_values(ScheduleMatrix(b), inst, FakeGrid(np.full((2, 2), 0.5)), ScheduleMatrix(b))
    assert gv == {"z1": 0.0, "z2": 0.0, "z3": 1.0, "z4": 0.0}
