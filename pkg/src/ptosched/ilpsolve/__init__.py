"""Exact solver for 0-1 linear programs with continuous non-negative variables."""

from .bnb import SolverConfig, lp_relax, solve
from .lpformat import read_lp, write_lp
from .model import (
    BINARY,
    CONTINUOUS,
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

__all__ = [
    "BINARY", "CONTINUOUS", "EQ", "GE", "LE",
    "INFEASIBLE", "OPTIMAL", "TIMEOUT_INCUMBENT", "TIMEOUT_NO_INCUMBENT",
    "MipModel", "ModelError", "SolveResult", "SolverConfig",
    "lp_relax", "solve", "read_lp", "write_lp",
]
