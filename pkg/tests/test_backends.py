"""Backend interface: capabilities, cross-engine agreement, rejection."""

from __future__ import annotations

import numpy as np
import pytest

from stochrwa import benders
from stochrwa.benders import BendersConfig, Method
from stochrwa.formulations import FormulationSpec, Problem, Relaxation
from stochrwa.solvers import (
    DUALS,
    LAZY_CUTS,
    CapabilityError,
    ReferenceBackend,
    SolveStatus,
    SolverConfig,
    get_backend,
    require_capabilities,
)
from stochrwa.topology import NetworkState
from stochrwa.traffic import ScenarioSample, TrafficParams, make_rng, sample_batch, sample_scenarios

from conftest import random_demand, random_topology


def test_reference_backend_reports_both_capabilities():
    for engine in ("simplex", "highs"):
        backend = get_backend(engine)
        assert backend.capabilities() == frozenset((DUALS, LAZY_CUTS))


def test_unknown_names_rejected():
    with pytest.raises(CapabilityError):
        get_backend("cplex")
    with pytest.raises(CapabilityError):
        ReferenceBackend("glpk")


class DuallessBackend:
    """Adapter that cannot report duals; decomposition must refuse it."""

    name = "dualless"

    def capabilities(self):
        return frozenset((LAZY_CUTS,))

    def solve_lp(self, model, config=None, *, var_bounds=None):
        raise NotImplementedError

    def solve_mip(self, model, config=None, callback=None):
        raise NotImplementedError


def test_dualless_adapter_rejected_by_decomposition(six_ring):
    with pytest.raises(CapabilityError, match="duals"):
        require_capabilities(DuallessBackend(), frozenset((DUALS, LAZY_CUTS)))
    state = NetworkState.empty(six_ring)
    params = TrafficParams(3.0, 0.5)
    demand = sample_batch(params, 6, make_rng(1))
    sample = sample_scenarios(params, 6, 2, make_rng(2))
    spec = FormulationSpec(Problem.SMAX_RWA, Relaxation.IP_LP, state, new_demand=demand, scenarios=sample)
    with pytest.raises(CapabilityError, match="duals"):
        benders.solve(spec, sample, BendersConfig(method=Method.BENDERS_XBETA), SolverConfig(), DuallessBackend())


def test_backend_swap_preserves_objectives():
    """Same instances, simplex vs HiGHS node relaxations: equal optima."""
    rng = np.random.default_rng(64)
    params = TrafficParams(3.0, 0.5)
    for _ in range(8):
        topo = random_topology(rng, max_nodes=5, max_edges=6)
        state = NetworkState.empty(topo)
        demand = random_demand(rng, topo.num_nodes, max_requests=3)
        sample = ScenarioSample(
            tuple(random_demand(rng, topo.num_nodes, 3) for _ in range(3))
        )
        objs = {}
        for engine in ("simplex", "highs"):
            spec = FormulationSpec(
                Problem.SMAX_RWA, Relaxation.IP_LP, state, new_demand=demand, scenarios=sample
            )
            res = benders.solve(
                spec, sample, BendersConfig(method=Method.BENDERS_XBETA), SolverConfig(), engine
            )
            assert res.status is SolveStatus.OPTIMAL
            objs[engine] = res.objective
        assert objs["simplex"] == pytest.approx(objs["highs"], rel=1e-6, abs=1e-6)
