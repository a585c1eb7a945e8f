"""LP and MIP solvers: reference simplex, branch and bound, backends."""

from .backend import DUALS, LAZY_CUTS, ReferenceBackend, SolverBackend, get_backend, require_capabilities
from .bnb import CutCallback, CutRow, NodeSolution, solve_mip
from .simplex import solve_lp
from .types import (
    CapabilityError,
    LpSolution,
    MipSolution,
    SolverConfig,
    SolverError,
    SolveStatus,
)

__all__ = [
    "CapabilityError",
    "CutCallback",
    "CutRow",
    "DUALS",
    "LAZY_CUTS",
    "LpSolution",
    "MipSolution",
    "NodeSolution",
    "ReferenceBackend",
    "SolveStatus",
    "SolverBackend",
    "SolverConfig",
    "SolverError",
    "get_backend",
    "require_capabilities",
    "solve_lp",
    "solve_mip",
]
