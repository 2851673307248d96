"""Mixed binary / continuous linear program container and solve result."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

BINARY = "binary"
CONTINUOUS = "continuous"

LE, GE, EQ = "<=", ">=", "=="
SENSES = (LE, GE, EQ)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
TIMEOUT_INCUMBENT = "timeout-incumbent"
TIMEOUT_NO_INCUMBENT = "timeout-no-incumbent"


class ModelError(ValueError):
    """Malformed model, or an LP relaxation that is unbounded."""


@dataclass
class Constraint:
    coeffs: dict[int, float]
    sense: str
    rhs: float
    name: str


class MipModel:
    """Minimize ``c @ x + constant`` over binaries and non-negative continuous variables.

    Rows are kept sparse as ``{var_index: coefficient}`` dicts; dense matrices
    are produced on demand by :meth:`matrices`.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.var_names: list[str] = []
        self.var_kinds: list[str] = []
        self.var_ub: list[float] = []
        self.objective: dict[int, float] = {}
        self.obj_constant = 0.0
        self.constraints: list[Constraint] = []
        self._index: dict[str, int] = {}

    # -- building --------------------------------------------------------------

    def add_variable(self, name: str, kind: str = CONTINUOUS, ub: float = math.inf) -> int:
        if kind not in (BINARY, CONTINUOUS):
            raise ModelError(f"unknown variable kind {kind!r}")
        if name in self._index:
            raise ModelError(f"duplicate variable name {name!r}")
        if kind == BINARY:
            ub = 1.0
        elif not ub >= 0:
            raise ModelError(f"variable {name!r}: upper bound {ub} below zero")
        k = len(self.var_names)
        self.var_names.append(name)
        self.var_kinds.append(kind)
        self.var_ub.append(float(ub))
        self._index[name] = k
        return k

    def add_binary(self, name: str) -> int:
        return self.add_variable(name, BINARY)

    def add_constraint(self, coeffs, sense: str, rhs: float, name: str | None = None) -> int:
        if sense not in SENSES:
            raise ModelError(f"unknown constraint sense {sense!r}")
        row: dict[int, float] = {}
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        for j, a in items:
            j = int(j)
            row[j] = row.get(j, 0.0) + float(a)
        row = {j: a for j, a in row.items() if a != 0.0}
        k = len(self.constraints)
        self.constraints.append(Constraint(row, sense, float(rhs), name or f"c{k}"))
        return k

    def set_objective(self, coeffs, constant: float = 0.0) -> None:
        obj: dict[int, float] = {}
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        for j, a in items:
            obj[int(j)] = obj.get(int(j), 0.0) + float(a)
        self.objective = {j: a for j, a in obj.items() if a != 0.0}
        self.obj_constant = float(constant)

    def copy(self) -> "MipModel":
        return copy.deepcopy(self)

    # -- queries ---------------------------------------------------------------

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def index(self, name: str) -> int:
        return self._index[name]

    def binary_mask(self) -> np.ndarray:
        return np.array([k == BINARY for k in self.var_kinds], dtype=bool)

    def validate(self) -> None:
        n = self.n_vars
        for j, a in self.objective.items():
            if not 0 <= j < n:
                raise ModelError(f"objective references undeclared variable {j}")
            if not math.isfinite(a):
                raise ModelError(f"objective coefficient of {self.var_names[j]} not finite")
        if not math.isfinite(self.obj_constant):
            raise ModelError("objective constant not finite")
        for con in self.constraints:
            if not math.isfinite(con.rhs):
                raise ModelError(f"constraint {con.name}: rhs not finite")
            for j, a in con.coeffs.items():
                if not 0 <= j < n:
                    raise ModelError(f"constraint {con.name} references undeclared variable {j}")
                if not math.isfinite(a):
                    raise ModelError(f"constraint {con.name}: coefficient not finite")

    def matrices(self):
        """Dense ``(c, A, senses, b, ub, is_binary)``; every lower bound is zero."""
        n, m = self.n_vars, self.n_constraints
        c = np.zeros(n)
        for j, a in self.objective.items():
            c[j] = a
        A = np.zeros((m, n))
        b = np.empty(m)
        senses = []
        for r, con in enumerate(self.constraints):
            for j, a in con.coeffs.items():
                A[r, j] = a
            b[r] = con.rhs
            senses.append(con.sense)
        return c, A, senses, b, np.array(self.var_ub, dtype=float), self.binary_mask()

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(sum(a * x[j] for j, a in self.objective.items()) + self.obj_constant)

    def row_activity(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([sum(a * x[j] for j, a in con.coeffs.items()) for con in self.constraints])

    def is_feasible(self, x, tol: float = 1e-6) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_vars,):
            return False
        ub = np.array(self.var_ub)
        if np.any(x < -tol) or np.any(x > ub + tol):
            return False
        binm = self.binary_mask()
        if np.any(np.abs(x[binm] - np.round(x[binm])) > tol):
            return False
        act = self.row_activity(x)
        for con, v in zip(self.constraints, act):
            scale = tol * max(1.0, abs(con.rhs))
            if con.sense == LE and v > con.rhs + scale:
                return False
            if con.sense == GE and v < con.rhs - scale:
                return False
            if con.sense == EQ and abs(v - con.rhs) > scale:
                return False
        return True


@dataclass
class SolveResult:
    status: str
    objective: float | None = None
    x: np.ndarray | None = None
    bound: float | None = None
    gap: float | None = None
    nodes: int = 0
    lp_iterations: int = 0
    wall_time: float = 0.0
    trace: list[dict] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    @property
    def has_solution(self) -> bool:
        return self.x is not None

    def value(self, index: int) -> float:
        return float(self.x[index])

    def values(self, indices: Iterable[int]) -> np.ndarray:
        return np.asarray(self.x)[list(indices)]
