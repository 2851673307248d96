"""Four-goal schedule optimization solved by preemptive lexicographic goal programming.

Goals, in default priority order:

1. cFTE compliance: ``sum_i |n_i - target_i|`` with ``n_i`` the clinician's
   shift count and ``target_i = round(cfte_i * |duty days|)``.
2. Shift-type equity: ``(1/|D|) sum_{i,s} |c_{i,s} - R_s/|I||`` with
   ``c_{i,s}`` the count of type-``s`` shifts and ``R_s`` total demand.
3. Availability: maximize ``sum p[i,t] B[i,s,t]``.
4. Consistency: ``sum |B - B_prev|`` against a prior schedule.

Each absolute value becomes a pair of non-negative deviation variables tied
to the expression by an equality row. Goal 4 needs none: ``B`` and
``B_prev`` are both binary, so ``|B - B_prev|`` is already linear in ``B``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import ilpsolve
from .core import InputError, ProblemInstance, ScheduleMatrix, validate_schedule
from .ilpsolve import EQ, GE, LE, MipModel, SolverConfig

__all__ = [
    "GOAL_NAMES",
    "GoalSpec",
    "StageReport",
    "LexSolution",
    "InfeasibleInstanceError",
    "ScheduleModel",
    "build_objectives",
    "build_constraints",
    "goal_values",
    "cfte_targets",
    "diagnose_infeasibility",
    "solve_lexicographic",
    "solve_weighted",
]

GOAL_NAMES = {1: "cfte_compliance", 2: "shift_type_equity", 3: "availability", 4: "consistency"}
DEFAULT_RANKS = (1, 2, 3, 4)


@dataclass(frozen=True)
class GoalSpec:
    goal: int
    rank: int
    aspiration: float = 0.0
    weight: float = 1.0


class InfeasibleInstanceError(RuntimeError):
    """The hard constraints admit no schedule; ``report`` lists failed necessary conditions."""

    def __init__(self, report: list[dict]):
        self.report = report
        lines = "; ".join(r["message"] for r in report) or "solver proved infeasibility"
        super().__init__(f"instance infeasible: {lines}")


def cfte_targets(inst: ProblemInstance) -> np.ndarray:
    """Shift-count targets ``round(cfte * |duty days|)``, halves rounded up."""
    nd = len(inst.duty_days)
    return np.array([math.floor(c.cfte * nd + 0.5 + 1e-9) for c in inst.clinicians], dtype=int)


def _grid_arrays(inst: ProblemInstance, grid):
    shape = (inst.n_clinicians, inst.n_days)
    if grid is None:
        return np.ones(shape), np.ones(shape, dtype=np.int8)
    p = np.asarray(grid.p, dtype=float)
    mask = np.asarray(grid.hard_mask)
    if p.shape != shape or mask.shape != shape:
        raise InputError(f"probability grid shape {p.shape} != {shape}")
    return p, mask


def _prev_array(inst: ProblemInstance, prev):
    if prev is None:
        return None
    b = prev.entries if isinstance(prev, ScheduleMatrix) else np.asarray(prev)
    if b.shape[1:2] != (inst.n_shift_types,):
        raise InputError("previous schedule has a different shift-type set")
    if b.shape != inst.shape:
        raise InputError(f"previous schedule shape {b.shape} != {inst.shape}")
    return b.astype(np.int64)


class ScheduleModel:
    """Assignment variables ``B[i, s, t]`` on duty days, inside one :class:`MipModel`.

    ``var[i, s, t]`` is the column index, or ``-1`` on non-duty days where
    no variable exists (those cells are always zero).
    """

    def __init__(self, inst: ProblemInstance):
        self.inst = inst
        self.model = MipModel("schedule")
        I, S, D = inst.shape
        self.var = np.full((I, S, D), -1, dtype=np.int64)
        for i in range(I):
            for s in range(S):
                for t in inst.duty_days:
                    self.var[i, s, t] = self.model.add_binary(f"B[{i},{s},{t}]")
        self.goals: dict[int, "Goal"] = {}
        self.row_counts: dict[str, int] = {}

    def cells(self):
        """Yield ``(i, s, t, column)`` for every assignment variable."""
        for i, s, t in zip(*np.nonzero(self.var >= 0)):
            yield int(i), int(s), int(t), int(self.var[i, s, t])

    def schedule_from(self, x) -> ScheduleMatrix:
        b = np.zeros(self.inst.shape, dtype=np.int8)
        for i, s, t, j in self.cells():
            b[i, s, t] = 1 if x[j] > 0.5 else 0
        return ScheduleMatrix(b)

    def point_from(self, sched: ScheduleMatrix) -> np.ndarray:
        """Full variable vector for a schedule, with deviations at their minimal values."""
        x = np.zeros(self.model.n_vars)
        for i, s, t, j in self.cells():
            x[j] = sched.entries[i, s, t]
        for goal in self.goals.values():
            for (pos, neg), expr_val in goal.deviation_values(x):
                x[pos] = max(expr_val, 0.0)
                x[neg] = max(-expr_val, 0.0)
        return x


@dataclass
class Goal:
    """One linearized goal.

    ``stage_objective`` plus ``constant`` is the quantity minimized in the
    goal's own stage: the deviation total for goals 1, 2 and 4, and ``-z3``
    for goal 3. ``pairs`` lists deviation columns with the affine expression
    they measure, as ``(pos, neg, coeffs, offset)``.
    """

    goal: int
    stage_objective: dict[int, float]
    constant: float = 0.0
    aspiration: float = 0.0
    pairs: list[tuple[int, int, dict[int, float], float]] = field(default_factory=list)

    def stage_value(self, x) -> float:
        return float(sum(a * x[j] for j, a in self.stage_objective.items()) + self.constant)

    def z_value(self, x) -> float:
        # every goal is stated as "maximize z"; stages minimize -z
        return -self.stage_value(x)

    def deviation_values(self, x):
        for pos, neg, coeffs, offset in self.pairs:
            yield (pos, neg), float(sum(a * x[j] for j, a in coeffs.items()) + offset)


@dataclass
class ObjectiveSet:
    sm: ScheduleModel
    goals: dict[int, Goal]

    @property
    def n_goals(self) -> int:
        return len(self.goals)


@dataclass
class ConstraintSet:
    sm: ScheduleModel
    counts: dict[str, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def build_objectives(
    inst: ProblemInstance,
    grid=None,
    prev=None,
    sm: ScheduleModel | None = None,
    tighten_equity: bool = True,
) -> ObjectiveSet:
    """Add the goal deviation variables and linking rows to ``sm``.

    Goal 4 is only built when ``prev`` is given. With ``tighten_equity`` each
    equity deviation pair also gets the chord inequality between the two
    integer counts bracketing the fractional mean share; it removes no
    integer point and closes most of the relaxation gap.
    """
    sm = sm or ScheduleModel(inst)
    if sm.inst is not inst:
        raise InputError("schedule model was built for a different instance")
    p, _ = _grid_arrays(inst, grid)
    prev_b = _prev_array(inst, prev)
    model = sm.model
    I, S, _ = inst.shape
    nd = len(inst.duty_days)
    goals: dict[int, Goal] = {}

    targets = cfte_targets(inst)
    g1 = Goal(1, {})
    for i in range(I):
        cols = [int(j) for j in sm.var[i].ravel() if j >= 0]
        pos = model.add_variable(f"d1p[{i}]")
        neg = model.add_variable(f"d1m[{i}]")
        coeffs = {j: 1.0 for j in cols}
        row = dict(coeffs)
        row[pos] = -1.0
        row[neg] = 1.0
        model.add_constraint(row, EQ, float(targets[i]), f"goal1[{i}]")
        g1.stage_objective[pos] = 1.0
        g1.stage_objective[neg] = 1.0
        g1.pairs.append((pos, neg, coeffs, -float(targets[i])))
    goals[1] = g1

    share = inst.demand.sum(axis=1) / I
    scale = 1.0 / nd if nd else 0.0
    g2 = Goal(2, {})
    for i in range(I):
        for s in range(S):
            cols = [int(j) for j in sm.var[i, s] if j >= 0]
            pos = model.add_variable(f"d2p[{i},{s}]")
            neg = model.add_variable(f"d2m[{i},{s}]")
            coeffs = {j: 1.0 for j in cols}
            row = dict(coeffs)
            row[pos] = -1.0
            row[neg] = 1.0
            model.add_constraint(row, EQ, float(share[s]), f"goal2[{i},{s}]")
            frac = float(share[s] - math.floor(share[s]))
            if tighten_equity and 1e-9 < frac < 1 - 1e-9:
                model.add_constraint(
                    {pos: frac, neg: 1.0 - frac}, GE, frac * (1.0 - frac), f"goal2chord[{i},{s}]"
                )
            g2.stage_objective[pos] = scale
            g2.stage_objective[neg] = scale
            g2.pairs.append((pos, neg, coeffs, -float(share[s])))
    goals[2] = g2

    g3 = Goal(3, {}, aspiration=float(inst.demand.sum() * p.max(initial=0.0)))
    for i, s, t, j in sm.cells():
        if p[i, t] != 0.0:
            g3.stage_objective[j] = -float(p[i, t])
    goals[3] = g3

    if prev_b is not None:
        g4 = Goal(4, {})
        const = float(prev_b[sm.var < 0].sum())
        for i, s, t, j in sm.cells():
            if prev_b[i, s, t]:
                g4.stage_objective[j] = -1.0
                const += 1.0
            else:
                g4.stage_objective[j] = 1.0
        g4.constant = const
        goals[4] = g4

    sm.goals = goals
    return ObjectiveSet(sm, goals)


def build_constraints(inst: ProblemInstance, grid=None, sm: ScheduleModel | None = None) -> ConstraintSet:
    """Add the hard rows: demand, one shift per day, workload, availability fixings, weekend caps."""
    sm = sm or ScheduleModel(inst)
    _, mask = _grid_arrays(inst, grid)
    model = sm.model
    I, S, _ = inst.shape
    counts = dict.fromkeys(("demand", "one_shift_per_day", "workload", "availability", "weekend"), 0)

    for s in range(S):
        for t in inst.duty_days:
            model.add_constraint({int(sm.var[i, s, t]): 1.0 for i in range(I)}, EQ,
                                 float(inst.demand[s, t]), f"demand[{s},{t}]")
            counts["demand"] += 1
    for i in range(I):
        for t in inst.duty_days:
            model.add_constraint({int(sm.var[i, s, t]): 1.0 for s in range(S)}, LE, 1.0,
                                 f"daily[{i},{t}]")
            counts["one_shift_per_day"] += 1
    for c in inst.clinicians:
        cols = {int(j): 1.0 for j in sm.var[c.clinician].ravel() if j >= 0}
        model.add_constraint(cols, GE, float(c.workload_lb), f"workload_lb[{c.clinician}]")
        model.add_constraint(cols, LE, float(c.workload_ub), f"workload_ub[{c.clinician}]")
        counts["workload"] += 2
    for i, s, t, j in sm.cells():
        if mask[i, t] == 0:
            model.add_constraint({j: 1.0}, LE, 0.0, f"avail[{i},{s},{t}]")
            counts["availability"] += 1
    if inst.weekend_days:
        for c in inst.clinicians:
            cols = {int(sm.var[c.clinician, s, t]): 1.0
                    for s in range(S) for t in inst.weekend_days if sm.var[c.clinician, s, t] >= 0}
            model.add_constraint(cols, LE, float(c.weekend_cap), f"weekend[{c.clinician}]")
            counts["weekend"] += 1
    sm.row_counts = counts
    return ConstraintSet(sm, counts)


def goal_values(sched: ScheduleMatrix, inst: ProblemInstance, grid=None, prev=None) -> dict:
    """Evaluate z1..z4 directly on a schedule (no linearization)."""
    p, _ = _grid_arrays(inst, grid)
    b = sched.entries.astype(np.int64)
    nd = len(inst.duty_days)
    I = inst.n_clinicians
    load = b.sum(axis=(1, 2))
    z1 = -float(np.abs(load - cfte_targets(inst)).sum())
    per_type = b[:, :, list(inst.duty_days)].sum(axis=2) if nd else np.zeros((I, inst.n_shift_types))
    mean_share = inst.demand.sum(axis=1) / (I * nd) if nd else np.zeros(inst.n_shift_types)
    z2 = -float(np.abs(per_type / nd - mean_share[None, :]).sum()) if nd else 0.0
    z3 = float((p[:, None, :] * b).sum())
    prev_b = _prev_array(inst, prev)
    z4 = None if prev_b is None else -float(np.abs(b - prev_b).sum())
    # maximization form: z1, z2, z4 are negated deviations (+ 0.0 drops the sign of a zero)
    return {"z1": z1 + 0.0, "z2": z2 + 0.0, "z3": z3, "z4": None if z4 is None else z4 + 0.0}


def diagnose_infeasibility(inst: ProblemInstance, grid=None) -> list[dict]:
    """Necessary conditions for feasibility that the instance violates."""
    _, mask = _grid_arrays(inst, grid)
    duty = list(inst.duty_days)
    out = []
    for t in duty:
        need = int(inst.demand[:, t].sum())
        avail = int(mask[:, t].sum())
        if need > avail:
            out.append({
                "condition": "daily_headcount", "index": [t], "required": need, "available": avail,
                "constraints": ["demand", "one_shift_per_day", "availability"],
                "message": f"day {inst.horizon[t]} needs {need} clinicians but {avail} are available",
            })
    for c in inst.clinicians:
        avail = int(mask[c.clinician, duty].sum())
        if c.workload_lb > avail:
            out.append({
                "condition": "workload_vs_availability", "index": [c.clinician],
                "required": c.workload_lb, "available": avail,
                "constraints": ["workload", "availability"],
                "message": (f"clinician {c.clinician} must work {c.workload_lb} shifts "
                            f"but is available on {avail} duty days"),
            })
    total = int(inst.demand.sum())
    lb = sum(c.workload_lb for c in inst.clinicians)
    cap = sum(min(c.workload_ub, int(mask[c.clinician, duty].sum())) for c in inst.clinicians)
    if lb > total:
        out.append({
            "condition": "workload_floor_exceeds_demand", "index": [], "required": lb,
            "available": total, "constraints": ["workload", "demand"],
            "message": f"workload lower bounds sum to {lb} but only {total} shifts are demanded",
        })
    if cap < total:
        out.append({
            "condition": "capacity_below_demand", "index": [], "required": total,
            "available": cap, "constraints": ["workload", "availability", "demand"],
            "message": f"demand totals {total} shifts but clinicians can cover at most {cap}",
        })
    weekend = [t for t in inst.weekend_days if t in set(duty)]
    if weekend:
        need = int(inst.demand[:, weekend].sum())
        cap = sum(c.weekend_cap for c in inst.clinicians)
        if need > cap:
            out.append({
                "condition": "weekend_caps", "index": weekend, "required": need, "available": cap,
                "constraints": ["weekend", "demand"],
                "message": f"weekend demand {need} exceeds the summed weekend caps {cap}",
            })
    return out


@dataclass
class StageReport:
    goal: int
    rank: int
    optimum: float
    deviations: tuple[float, float]
    proved_optimal: bool
    wall_ms: float
    nodes: int
    status: str
    bound: float | None

    def as_dict(self) -> dict:
        return {
            "goal": self.goal,
            "name": GOAL_NAMES.get(self.goal, str(self.goal)),
            "rank": self.rank,
            "optimum": self.optimum,
            "deviations": list(self.deviations),
            "proved_optimal": self.proved_optimal,
            "status": self.status,
            "bound": self.bound,
            "nodes": self.nodes,
            "wall_ms": self.wall_ms,
        }


@dataclass
class LexSolution:
    schedule: ScheduleMatrix
    objective_values: dict
    stages: list[StageReport]
    wall_time: float
    mode: str = "lex"

    @property
    def proved_optimal(self) -> bool:
        return all(s.proved_optimal for s in self.stages)

    def stage(self, goal: int) -> StageReport:
        for s in self.stages:
            if s.goal == goal:
                return s
        raise KeyError(goal)

    def report(self, timings: bool = True) -> dict:
        stages = [s.as_dict() for s in self.stages]
        if not timings:
            for s in stages:
                s.pop("wall_ms")
        return {"mode": self.mode, "stages": stages, "objective_values": dict(self.objective_values)}


def _deviation_pair(goal: Goal, stage_value: float) -> tuple[float, float]:
    """``(d-, d+)`` of ``z + d- - d+ = g``."""
    z = -stage_value
    gap = goal.aspiration - z
    return (max(gap, 0.0), max(-gap, 0.0))


def _normalize_ranks(ranks, available: Sequence[int]) -> list[int]:
    """Goals in priority order, given either a rank per goal or an ordered goal list."""
    if ranks is None:
        order = list(DEFAULT_RANKS)
    elif isinstance(ranks, Mapping):
        if sorted(ranks.values()) != list(range(1, len(ranks) + 1)):
            raise InputError(f"goal ranks {ranks} are not a permutation")
        order = [g for g, _ in sorted(ranks.items(), key=lambda kv: kv[1])]
    else:
        order = [int(g) for g in ranks]
    if sorted(order) != sorted(set(order)) or not set(order) <= set(GOAL_NAMES):
        raise InputError(f"invalid goal order {order}")
    return [g for g in order if g in available]


def _prepare(inst, grid, prev, tighten_equity):
    sm = ScheduleModel(inst)
    build_constraints(inst, grid, sm)
    build_objectives(inst, grid, prev, sm, tighten_equity=tighten_equity)
    return sm


def _feasibility(sm: ScheduleModel, inst, grid, cfg: SolverConfig):
    probe = sm.model.copy()
    probe.set_objective({})
    res = ilpsolve.solve(probe, cfg)
    if res.status == ilpsolve.INFEASIBLE:
        raise InfeasibleInstanceError(diagnose_infeasibility(inst, grid))
    if not res.has_solution:
        raise InfeasibleInstanceError(
            diagnose_infeasibility(inst, grid)
            + [{"condition": "feasibility_timeout", "index": [], "required": None,
                "available": None, "constraints": [],
                "message": "no feasible schedule found within the solver budget"}]
        )
    return res.x


def _finish(sm, inst, grid, prev, x, stages, t0, mode):
    sched = sm.schedule_from(x)
    _, mask = _grid_arrays(inst, grid)
    report = validate_schedule(sched, inst, mask)
    if not report.ok:
        raise RuntimeError(f"solver returned a schedule violating hard constraints: {report.violations[:3]}")
    return LexSolution(sched, goal_values(sched, inst, grid, prev), stages, time.perf_counter() - t0, mode)


def solve_lexicographic(
    inst: ProblemInstance,
    grid=None,
    prev=None,
    ranks=None,
    eps: float = 1e-6,
    solver_cfg: SolverConfig | None = None,
    tighten_equity: bool = True,
) -> LexSolution:
    """Preemptive goal programming: optimize goals one at a time in rank order.

    Each stage minimizes its own goal subject to the hard constraints and to
    ``stage_j <= optimum_j + eps`` for every earlier stage ``j``. The previous
    stage's schedule seeds each stage as an incumbent.
    """
    t0 = time.perf_counter()
    cfg = solver_cfg or SolverConfig()
    sm = _prepare(inst, grid, prev, tighten_equity)
    order = _normalize_ranks(ranks, list(sm.goals))
    x = _feasibility(sm, inst, grid, cfg)
    locked = sm.model.copy()
    stages: list[StageReport] = []
    for rank, k in enumerate(order, start=1):
        goal = sm.goals[k]
        stage = locked.copy()
        stage.set_objective(goal.stage_objective, goal.constant)
        ts = time.perf_counter()
        res = ilpsolve.solve(stage, cfg, incumbent=x)
        if not res.has_solution:
            raise RuntimeError(f"stage for goal {k} lost its incumbent")
        x = res.x
        optimum = goal.stage_value(x)
        stages.append(StageReport(
            goal=k, rank=rank, optimum=optimum, deviations=_deviation_pair(goal, optimum),
            proved_optimal=res.optimal, wall_ms=(time.perf_counter() - ts) * 1e3,
            nodes=res.nodes, status=res.status, bound=res.bound,
        ))
        locked.add_constraint(goal.stage_objective, LE, optimum + eps - goal.constant, f"lock[{k}]")
    return _finish(sm, inst, grid, prev, x, stages, t0, "lex")


def solve_weighted(
    inst: ProblemInstance,
    grid=None,
    prev=None,
    weights: Sequence[float] | Mapping[int, float] = (1.0, 1.0, 1.0, 1.0),
    solver_cfg: SolverConfig | None = None,
    tighten_equity: bool = True,
) -> LexSolution:
    """Single solve of ``min sum_k w_k (d_k^- + d_k^+)``.

    Goal 3's deviation is measured from its aspiration, an upper bound on
    ``z3``; the constant part does not move the minimizer.
    """
    if isinstance(weights, Mapping):
        w = {int(k): float(v) for k, v in weights.items()}
    else:
        w = {k + 1: float(v) for k, v in enumerate(weights)}
    if any(v < 0 for v in w.values()) or not any(v > 0 for v in w.values()):
        raise InputError("weights must be non-negative and not all zero")
    t0 = time.perf_counter()
    cfg = solver_cfg or SolverConfig()
    sm = _prepare(inst, grid, prev, tighten_equity)
    x0 = _feasibility(sm, inst, grid, cfg)
    obj: dict[int, float] = {}
    const = 0.0
    active = [k for k in sorted(w) if w[k] > 0 and k in sm.goals]
    for k in active:
        goal = sm.goals[k]
        for j, a in goal.stage_objective.items():
            obj[j] = obj.get(j, 0.0) + w[k] * a
        # d^- + d^+ equals the stage value, plus the aspiration for goal 3
        const += w[k] * (goal.constant + (goal.aspiration if k == 3 else 0.0))
    model = sm.model.copy()
    model.set_objective(obj, const)
    ts = time.perf_counter()
    res = ilpsolve.solve(model, cfg, incumbent=x0)
    x = res.x
    stages = []
    for rank, k in enumerate(active, start=1):
        goal = sm.goals[k]
        v = goal.stage_value(x)
        stages.append(StageReport(
            goal=k, rank=rank, optimum=v, deviations=_deviation_pair(goal, v),
            proved_optimal=res.optimal, wall_ms=(time.perf_counter() - ts) * 1e3,
            nodes=res.nodes, status=res.status, bound=res.bound,
        ))
    sol = _finish(sm, inst, grid, prev, x, stages, t0, "weighted")
    sol.objective_values["weighted"] = float(res.objective)
    return sol
