"""Stochastic routing and wavelength assignment for WDM optical networks.

Deterministic and two-stage stochastic provisioning (maxRWA / SmaxRWA) and
lightpath rerouting (minRWA / SmaxLR), solved by a multi-cut decomposition
with a per-arc-load cut family over an in-tree LP/MIP solver, plus sampling
bounds and rolling-horizon traffic simulations.
"""

__version__ = "0.1.0"

from .benders import BendersConfig, BendersResult, Cut, CutPool, Method
from .formulations import FormulationSpec, Problem, Relaxation
from .sim import Policy, SimConfig, SimTrace
from .solvers import LpSolution, MipSolution, SolveStatus, SolverConfig, get_backend
from .topology import (
    ActiveConnection,
    LightpathAssignment,
    NetworkState,
    Topology,
    load_topology,
)
from .traffic import DemandMatrix, ScenarioSample, TrafficParams, make_rng

__all__ = [
    "ActiveConnection",
    "BendersConfig",
    "BendersResult",
    "Cut",
    "CutPool",
    "DemandMatrix",
    "FormulationSpec",
    "LightpathAssignment",
    "LpSolution",
    "Method",
    "MipSolution",
    "NetworkState",
    "Policy",
    "Problem",
    "Relaxation",
    "ScenarioSample",
    "SimConfig",
    "SimTrace",
    "SolveStatus",
    "SolverConfig",
    "Topology",
    "TrafficParams",
    "get_backend",
    "load_topology",
    "make_rng",
]
