"""LP-based branch and bound for mixed binary programs."""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np

from .model import (
    BINARY,
    EQ,
    GE,
    INFEASIBLE,
    LE,
    OPTIMAL,
    TIMEOUT_INCUMBENT,
    TIMEOUT_NO_INCUMBENT,
    MipModel,
    ModelError,
    SolveResult,
)
from . import simplex

INT_TOL = 1e-6


@dataclass
class SolverConfig:
    """Limits and tolerances for :func:`solve`.

    ``time_limit`` is wall-clock seconds; ``node_limit`` gives a machine
    independent budget and keeps timeouts reproducible.
    """

    time_limit: float | None = None
    node_limit: int | None = None
    tolerance: float = 1e-6
    rel_tolerance: float = 1e-6
    trace: bool = False


@dataclass
class _Reduced:
    cols: np.ndarray
    fixed: np.ndarray
    A: np.ndarray
    senses: list
    b: np.ndarray
    c: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    is_bin: np.ndarray
    const: float

    def expand(self, xr: np.ndarray) -> np.ndarray:
        x = self.fixed.copy()
        x[self.cols] = xr
        return x


def _presolve(model: MipModel, tol: float = 1e-9):
    """Turn singleton rows into bounds and drop fixed columns.

    Returns ``None`` when the bounds alone prove infeasibility.
    """
    c, A, senses, b, ub, is_bin = model.matrices()
    m, n = A.shape
    lo = np.zeros(n)
    hi = ub.copy()
    active = np.ones(m, dtype=bool)
    fixed = np.zeros(n, dtype=bool)

    changed = True
    while changed:
        changed = False
        fixed_now = hi - lo <= tol
        newly = fixed_now & ~fixed
        if newly.any():
            fixed |= newly
            changed = True
        value = np.where(fixed, lo, 0.0)
        resid = b - A @ value
        live = (A != 0) & ~fixed[None, :]
        counts = live.sum(axis=1)
        for r in np.flatnonzero(active & (counts <= 1)):
            sense = senses[r]
            if counts[r] == 0:
                v = resid[r]
                bad = (
                    (sense == LE and v < -1e-7 * max(1.0, abs(b[r])))
                    or (sense == GE and v > 1e-7 * max(1.0, abs(b[r])))
                    or (sense == EQ and abs(v) > 1e-7 * max(1.0, abs(b[r])))
                )
                if bad:
                    return None
                active[r] = False
                continue
            j = int(np.flatnonzero(live[r])[0])
            a = A[r, j]
            bound = resid[r] / a
            upper = (sense == LE) == (a > 0)
            if sense == EQ:
                lo[j] = max(lo[j], bound)
                hi[j] = min(hi[j], bound)
            elif upper:
                hi[j] = min(hi[j], bound)
            else:
                lo[j] = max(lo[j], bound)
            if is_bin[j]:
                lo[j] = math.ceil(lo[j] - 1e-6)
                hi[j] = math.floor(hi[j] + 1e-6)
            if lo[j] > hi[j] + 1e-7:
                return None
            hi[j] = max(hi[j], lo[j])
            active[r] = False
            changed = True

    if np.any(lo > hi + 1e-7):
        return None
    value = np.where(fixed, lo, 0.0)
    cols = np.flatnonzero(~fixed)
    rows = np.flatnonzero(active)
    full = np.where(fixed, lo, np.nan)
    return _Reduced(
        cols=cols,
        fixed=full,
        A=A[np.ix_(rows, cols)],
        senses=[senses[r] for r in rows],
        b=(b - A @ value)[rows],
        c=c[cols],
        lo=lo[cols],
        hi=hi[cols],
        is_bin=is_bin[cols],
        const=float(c @ value) + model.obj_constant,
    )


def _most_fractional(x: np.ndarray, is_bin: np.ndarray) -> int | None:
    frac = np.abs(x - np.round(x))
    frac = np.where(is_bin, frac, 0.0)
    j = int(np.argmax(frac)) if frac.size else 0
    if frac.size == 0 or frac[j] <= INT_TOL:
        return None
    # argmax already returns the lowest index among the most fractional
    return j


def lp_relax(model: MipModel) -> SolveResult:
    """Solve the LP relaxation (binaries relaxed to ``[0, 1]``)."""
    t0 = time.perf_counter()
    model.validate()
    red = _presolve(model)
    if red is None:
        return SolveResult(INFEASIBLE, wall_time=time.perf_counter() - t0)
    lp = simplex.BoundedSimplex(red.A, red.b, red.c, red.lo, red.hi, red.senses)
    status = lp.solve()
    if status == simplex.UNBOUNDED:
        raise ModelError("LP relaxation is unbounded")
    elapsed = time.perf_counter() - t0
    if status == simplex.INFEASIBLE:
        return SolveResult(INFEASIBLE, lp_iterations=lp.iterations, wall_time=elapsed)
    x = red.expand(lp.x_struct)
    val = lp.objective + red.const
    return SolveResult(
        OPTIMAL, objective=val, x=x, bound=val, gap=0.0, nodes=1,
        lp_iterations=lp.iterations, wall_time=elapsed,
    )


def solve(model: MipModel, cfg: SolverConfig | None = None, incumbent=None) -> SolveResult:
    """Branch and bound with bounded-simplex relaxations.

    Branches on the most fractional binary (lowest index on ties), dives
    depth-first into the child on the rounding side, and restarts from the
    best-bound open node whenever a dive ends. ``incumbent`` is an optional
    feasible point that seeds the upper bound.
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    model.validate()
    trace: list[dict] = []

    def finish(status, x=None, obj=None, bound=None, nodes=0, iters=0):
        gap = None
        if obj is not None and bound is not None:
            gap = max(0.0, obj - bound)
        return SolveResult(
            status, objective=obj, x=x, bound=bound, gap=gap, nodes=nodes,
            lp_iterations=iters, wall_time=time.perf_counter() - t0, trace=trace,
        )

    red = _presolve(model)
    if red is None:
        return finish(INFEASIBLE)

    inc_x = None
    inc_val = math.inf
    if incumbent is not None:
        x0 = np.asarray(incumbent, dtype=float)
        if model.is_feasible(x0):
            inc_x = x0.copy()
            binm = model.binary_mask()
            inc_x[binm] = np.round(inc_x[binm])
            inc_val = model.evaluate(inc_x)

    lp = simplex.BoundedSimplex(red.A, red.b, red.c, red.lo, red.hi, red.senses)
    status = lp.solve()
    if status == simplex.UNBOUNDED:
        raise ModelError("LP relaxation is unbounded")

    integral = _integral_objective(model)

    def prunable(bound: float) -> bool:
        if integral:
            bound = math.ceil(bound - cfg.tolerance)
            return bound >= inc_val - 1e-9
        slack = max(cfg.tolerance, cfg.rel_tolerance * abs(inc_val)) if math.isfinite(inc_val) else 0.0
        return bound >= inc_val - slack

    heap: list = []
    seq = 0
    nodes = 0
    lo = red.lo.copy()
    hi = red.hi.copy()
    depth = 0
    current = True
    timed_out = False
    open_bound = math.inf

    def out_of_budget() -> bool:
        if cfg.node_limit is not None and nodes >= cfg.node_limit:
            return True
        return cfg.time_limit is not None and time.perf_counter() - t0 > cfg.time_limit

    while True:
        if current:
            nodes += 1
            if status == simplex.INFEASIBLE:
                if cfg.trace:
                    trace.append({"node": nodes, "depth": depth, "status": "infeasible",
                                  "bound": None, "incumbent": inc_val})
                current = False
            else:
                bound = lp.objective + red.const
                if cfg.trace:
                    trace.append({"node": nodes, "depth": depth, "status": "solved",
                                  "bound": bound, "incumbent": inc_val})
                if prunable(bound):
                    current = False
                else:
                    xr = lp.x_struct
                    j = _most_fractional(xr, red.is_bin)
                    if j is None:
                        cand = _polish(lp, red, xr, lo, hi)
                        if cand is not None:
                            val = model.evaluate(cand)
                            if val < inc_val:
                                inc_val, inc_x = val, cand
                        current = False
                    else:
                        down_hi = hi.copy()
                        down_hi[j] = 0.0
                        up_lo = lo.copy()
                        up_lo[j] = 1.0
                        if xr[j] >= 0.5:
                            first, second = (up_lo, hi), (lo, down_hi)
                        else:
                            first, second = (lo, down_hi), (up_lo, hi)
                        seq += 1
                        heapq.heappush(heap, (bound, seq, depth + 1, second[0], second[1], lp.snapshot()))
                        lo, hi = first[0].copy(), first[1].copy()
                        depth += 1
                        if out_of_budget():
                            timed_out = True
                            open_bound = min(open_bound, bound)
                            break
                        status = lp.reoptimize(lo, hi)
                        continue
        while heap and prunable(heap[0][0]):
            heapq.heappop(heap)
        if not heap:
            break
        if out_of_budget():
            timed_out = True
            break
        _, _, depth, lo, hi, snap = heapq.heappop(heap)
        status = lp.reoptimize(lo, hi, snapshot=snap)
        current = True

    if timed_out:
        pending = [h[0] for h in heap if not prunable(h[0])]
        best = min(pending + [open_bound, inc_val])
        if inc_x is None:
            return finish(TIMEOUT_NO_INCUMBENT, bound=best, nodes=nodes, iters=lp.iterations)
        return finish(TIMEOUT_INCUMBENT, x=inc_x, obj=inc_val, bound=best, nodes=nodes,
                      iters=lp.iterations)
    if inc_x is None:
        return finish(INFEASIBLE, nodes=nodes, iters=lp.iterations)
    return finish(OPTIMAL, x=inc_x, obj=inc_val, bound=inc_val, nodes=nodes, iters=lp.iterations)


def _integral_objective(model: MipModel) -> bool:
    """True when every feasible point has an integer objective value."""
    if model.obj_constant != round(model.obj_constant):
        return False
    for j, a in model.objective.items():
        if model.var_kinds[j] != BINARY or a != round(a):
            return False
    return True


def _polish(lp, red: _Reduced, xr, lo, hi):
    """Round binaries and re-solve the continuous part exactly."""
    xr = xr.copy()
    if not red.is_bin.any():
        return red.expand(xr)
    rounded = np.round(xr[red.is_bin])
    plo, phi = lo.copy(), hi.copy()
    plo[red.is_bin] = rounded
    phi[red.is_bin] = rounded
    if red.is_bin.all():
        xr[red.is_bin] = rounded
        return red.expand(xr)
    status = lp.reoptimize(plo, phi)
    if status != simplex.OPTIMAL:
        return None
    xr = lp.x_struct
    xr[red.is_bin] = rounded
    return red.expand(xr)
