"""Shared solver result types and configuration."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"
    TIME_LIMIT = "time_limit"


class SolverError(RuntimeError):
    pass


class CapabilityError(SolverError):
    """Backend lacks a capability the caller requires (duals, lazy cuts)."""


@dataclass
class SolverConfig:
    """Numeric tolerances and limits shared by the LP and MIP solvers.

    ``node_selection`` and ``branching`` name the only implemented
    strategies; they are recorded here so run manifests are explicit.
    """

    tol_feas: float = 1e-7
    tol_int: float = 1e-6
    tol_obj: float = 1e-6
    time_limit_seconds: float = 600.0
    iteration_limit: int = 500_000
    node_limit: int | None = None
    node_selection: str = "best-bound"
    branching: str = "most-fractional"

    def __post_init__(self) -> None:
        if min(self.tol_feas, self.tol_int, self.tol_obj) <= 0:
            raise ValueError("tolerances must be positive")
        if self.node_selection != "best-bound":
            raise ValueError(f"unsupported node selection {self.node_selection!r}")
        if self.branching != "most-fractional":
            raise ValueError(f"unsupported branching rule {self.branching!r}")


@dataclass
class LpSolution:
    """LP solve outcome; primal/dual values are meaningful when optimal.

    Duals follow the maximization convention: <= rows have nonnegative
    duals, >= rows nonpositive, equality rows free.
    """

    status: SolveStatus
    objective: float
    primal: np.ndarray
    duals: np.ndarray
    reduced_costs: np.ndarray
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


@dataclass
class MipSolution:
    """Branch-and-bound outcome with incumbent, bound, and search stats."""

    status: SolveStatus
    objective: float
    incumbent: np.ndarray | None
    bound: float
    node_count: int = 0
    cut_counts: dict[str, int] = field(default_factory=dict)
    solve_seconds: float = 0.0

    @property
    def gap(self) -> float:
        if self.incumbent is None:
            return math.inf
        return abs(self.bound - self.objective) / max(1.0, abs(self.objective))

    @property
    def is_optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL
