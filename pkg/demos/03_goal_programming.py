"""The exact solver and the lexicographic scheduler on instances small enough to read.

Run: python demos/03_goal_programming.py
"""

import numpy as np

from ptosched.availpred import fuse_probabilities
from ptosched.core import ClinicianContract, ProblemInstance, ScheduleMatrix, ShiftType, validate_schedule
from ptosched.ilpsolve import LE, MipModel, solve
from ptosched.schedopt import solve_lexicographic, solve_weighted

# %% A 0-1 knapsack through the branch-and-bound solver.
rng = np.random.default_rng(3)
w, v = rng.integers(1, 10, 10), rng.integers(1, 20, 10)
m = MipModel("knapsack")
xs = [m.add_binary(f"take{k}") for k in range(10)]
m.add_constraint({x: float(a) for x, a in zip(xs, w)}, LE, 20.0)
m.set_objective({x: -float(b) for x, b in zip(xs, v)})
res = solve(m)
print(f"knapsack: status={res.status} value={-res.objective:.0f} nodes={res.nodes}")

# %% One week, four clinicians, clinic and procedure shifts.
days = [f"2024-03-{d:02d}" for d in range(4, 9)]
clin = [ClinicianContract(i, c, 1, 5, 0, group=i % 2) for i, c in enumerate([0.8, 0.6, 0.4, 0.6])]
demand = np.array([[2, 1, 2, 1, 2], [1, 1, 0, 1, 1]])
inst = ProblemInstance(clin, [ShiftType(0, "Clin"), ShiftType(1, "Proc")], days, range(5), [], demand)

p = rng.uniform(0.4, 0.95, (4, 5))
p[1, 2] = 0.92
grid = fuse_probabilities(p, {(1, 2): 0})  # a PTO note removes clinician 1 from Wednesday
prev = ScheduleMatrix(rng.integers(0, 2, inst.shape).astype(np.int8) * (demand > 0))

sol = solve_lexicographic(inst, grid, prev)
print("\nlexicographic stages (goal: optimum)")
for s in sol.stages:
    print(f"  goal {s.goal}: {s.optimum:.4f}  optimal={s.proved_optimal}")
print("objective values:", {k: None if v is None else round(v, 4) for k, v in sol.objective_values.items()})
print("valid:", validate_schedule(sol.schedule, inst, grid.hard_mask).ok)
print("Wednesday, clinician 1 assigned:", int(sol.schedule.entries[1, :, 2].sum()))

for i in range(4):
    row = "".join("C" if sol.schedule.entries[i, 0, t] else "P" if sol.schedule.entries[i, 1, t] else "."
                  for t in range(5))
    print(f"  clinician {i} (cfte {clin[i].cfte}): {row}")

# %% The weighted alternative folds all goals into one objective.
ws = solve_weighted(inst, grid, prev, weights=(1, 1, 1, 1))
print("\nweighted (1,1,1,1):", {k: None if v is None else round(v, 4) for k, v in ws.objective_values.items()})
