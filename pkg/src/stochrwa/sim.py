"""Rolling-horizon traffic simulations.

Two frameworks, matching how the two problem families are used in practice:

* provisioning runs: the network starts empty; each stage a batch arrives
  and is granted by either the deterministic grant-maximizing model or its
  two-stage stochastic counterpart (fresh scenario sample every stage);
  expired connections drop at the end of the stage.
* defragmentation runs: the network starts with a random feasible
  provisioning; at the beginning of each stage the current connections are
  rerouted to a target computed by either wavelink-count minimization or
  the stochastic rerouting model, then drops happen, then the new batch is
  granted by the deterministic model.

Blocked requests leave the system; holding times are attached to requests
at arrival, so paired runs (same seed, different policy) see identical
arrival streams.  A policy solve that misses its time budget falls back to
the deterministic counterpart for that stage and is flagged in the trace.
"""

from __future__ import annotations

import csv
import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import IO, Sequence

import numpy as np

from . import benders
from .benders import BendersConfig, Method
from .formulations import (
    DecodedLightpath,
    FormulationSpec,
    Problem,
    Relaxation,
    build_first_stage,
    decode_provisioning,
)
from .solvers import SolveStatus, SolverConfig, get_backend
from .topology import (
    ActiveConnection,
    LightpathAssignment,
    NetworkState,
    Topology,
    apply_provisioning,
    drop_expired,
    rebuild_with_connections,
)
from .traffic import DemandMatrix, Pair, TrafficParams, make_rng, sample_requests, sample_scenarios


class SimulationError(RuntimeError):
    pass


class Policy(enum.Enum):
    MAX_RWA = "maxRWA"
    SMAX_RWA = "SmaxRWA"
    MIN_RWA_DEFRAG = "minRWA_defrag"
    SMAX_LR_DEFRAG = "SmaxLR_defrag"


_PROVISIONING = (Policy.MAX_RWA, Policy.SMAX_RWA)
_DEFRAG = (Policy.MIN_RWA_DEFRAG, Policy.SMAX_LR_DEFRAG)
_STOCHASTIC = (Policy.SMAX_RWA, Policy.SMAX_LR_DEFRAG)

# entropy-stream tags
_STREAM_ARRIVALS = 1
_STREAM_SCENARIOS = 2
_STREAM_INITIAL = 3


@dataclass
class SimConfig:
    policy: Policy
    horizon: int
    traffic: TrafficParams
    wavelengths: int
    repetitions: int = 50
    scenario_count: int = 0
    initial_requests: int = 0
    seed: int = 0
    method: Method = Method.BENDERS_XBETA
    engine: str = "highs"
    solver: SolverConfig = field(default_factory=SolverConfig)
    policy_time_limit: float = 600.0

    def __post_init__(self) -> None:
        if isinstance(self.policy, str):
            self.policy = Policy(self.policy)
        if isinstance(self.method, str):
            self.method = Method(self.method)
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.policy in _STOCHASTIC and self.scenario_count < 1:
            raise ValueError(f"{self.policy.value} needs scenario_count >= 1")
        if self.policy in _DEFRAG and self.initial_requests < 1:
            raise ValueError(f"{self.policy.value} needs initial_requests >= 1")


@dataclass(frozen=True)
class StageRecord:
    stage: int
    arrivals: int
    granted: int
    blocked: int
    cum_arrivals: int
    cum_granted: int
    gos: float
    spectrum_usage: int
    post_defrag_usage: int | None = None
    fallback: bool = False


@dataclass(frozen=True)
class SimTrace:
    policy: str
    seed: int
    run_index: int
    records: tuple[StageRecord, ...]

    @property
    def fallback_count(self) -> int:
        return sum(1 for r in self.records if r.fallback)

    @property
    def cum_granted(self) -> int:
        return self.records[-1].cum_granted if self.records else 0


# ---------------------------------------------------------------------------
# deterministic helpers


def shortest_free_path(topo: Topology, free_arcs: frozenset[int], s: int, d: int) -> list[int] | None:
    """Fewest-hop path on the free arcs; deterministic arc-id tie-breaks."""
    parents: dict[int, tuple[int, int]] = {}
    seen = {s}
    frontier = [s]
    while frontier and d not in parents and d != s:
        nxt: list[int] = []
        for node in frontier:
            for arc in topo.out_arcs(node):
                if arc.id in free_arcs and arc.head not in seen:
                    seen.add(arc.head)
                    parents[arc.head] = (node, arc.id)
                    nxt.append(arc.head)
        if d in parents:
            break
        frontier = nxt
    if d not in parents:
        return None
    path: list[int] = []
    node = d
    while node != s:
        prev, arc_id = parents[node]
        path.append(arc_id)
        node = prev
    return list(reversed(path))


def random_initial_state(
    topo: Topology,
    count: int,
    traffic: TrafficParams,
    rng,
    *,
    max_attempts_factor: int = 60,
) -> NetworkState:
    """Randomly provision ``count`` connections, first-fit over wavelengths.

    Every placed connection is routed on free wavelinks, so the result is a
    feasible provisioning by construction; raises after bounded retries if
    the network cannot hold that many connections.
    """
    state = NetworkState.empty(topo)
    attempts = 0
    placed = 0
    from .traffic import sample_holding

    while placed < count:
        attempts += 1
        if attempts > max_attempts_factor * max(count, 1):
            raise SimulationError(
                f"could not place {count} initial connections after {attempts} attempts"
            )
        s = int(rng.integers(topo.num_nodes))
        d = int(rng.integers(topo.num_nodes - 1))
        if d >= s:
            d += 1
        for w in topo.wavelengths:
            path = shortest_free_path(topo, state.available(w), s, d)
            if path is not None:
                hold = sample_holding(traffic, rng)
                state = apply_provisioning(
                    state, [LightpathAssignment(s, d, w, tuple(path), hold)]
                )
                placed += 1
                break
    return state


def _assign_requests(
    decoded: Sequence[DecodedLightpath],
    requests: Sequence[tuple[Pair, int]],
    stage: int,
) -> list[LightpathAssignment]:
    """Attach decoded lightpaths to arriving requests, in arrival order per pair."""
    queue: dict[Pair, list[int]] = {}
    for pair, hold in requests:
        queue.setdefault(pair, []).append(hold)
    assignments = []
    for lp in decoded:
        pair = (lp.source, lp.destination)
        holds = queue.get(pair)
        if not holds:
            raise SimulationError(f"decoded lightpath for {pair} has no matching request")
        hold = holds.pop(0)
        assignments.append(
            LightpathAssignment(lp.source, lp.destination, lp.wavelength, lp.path, stage + hold)
        )
    return assignments


def _grant_deterministic(
    state: NetworkState,
    demand: DemandMatrix,
    config: SimConfig,
    backend,
) -> tuple[list[DecodedLightpath], bool]:
    """One-stage grant-maximizing solve; returns (lightpaths, fallback flag)."""
    spec = FormulationSpec(Problem.MAX_RWA, Relaxation.IP_IP, state, new_demand=demand)
    model = build_first_stage(spec)
    if model.num_cols == 0:
        return [], False
    solver = replace(config.solver, time_limit_seconds=config.policy_time_limit)
    mip = backend.solve_mip(model, solver)
    if mip.incumbent is None:
        return [], True
    decoded = decode_provisioning(spec, model, mip.incumbent)
    return decoded, mip.status is not SolveStatus.OPTIMAL


def run_provisioning(topo: Topology, config: SimConfig, run_index: int = 0) -> SimTrace:
    """One run of the stage loop: arrivals, grant by policy, drops at stage end."""
    if config.policy not in _PROVISIONING:
        raise ValueError(f"{config.policy.value} is not a provisioning policy")
    work_topo = topo.with_wavelengths(config.wavelengths)
    backend = get_backend(config.engine)
    state = NetworkState.empty(work_topo)
    records: list[StageRecord] = []
    cum_arrivals = 0
    cum_granted = 0
    for stage in range(1, config.horizon + 1):
        rng = make_rng(config.seed, run_index, stage, _STREAM_ARRIVALS)
        requests = sample_requests(config.traffic, work_topo.num_nodes, rng)
        demand = DemandMatrix.from_mapping(
            _count_pairs(pair for pair, _ in requests)
        )
        decoded: list[DecodedLightpath] = []
        fallback = False
        if demand:
            if config.policy is Policy.SMAX_RWA:
                decoded, fallback = _grant_stochastic(state, demand, config, backend, run_index, stage)
            else:
                decoded, fallback = _grant_deterministic(state, demand, config, backend)
        state = apply_provisioning(state, _assign_requests(decoded, requests, stage))
        cum_arrivals += len(requests)
        cum_granted += len(decoded)
        records.append(
            StageRecord(
                stage=stage,
                arrivals=len(requests),
                granted=len(decoded),
                blocked=len(requests) - len(decoded),
                cum_arrivals=cum_arrivals,
                cum_granted=cum_granted,
                gos=(cum_granted / cum_arrivals) if cum_arrivals else 1.0,
                spectrum_usage=state.spectrum_usage(),
                fallback=fallback,
            )
        )
        state = drop_expired(state, stage)
    return SimTrace(config.policy.value, config.seed, run_index, tuple(records))


def _grant_stochastic(
    state: NetworkState,
    demand: DemandMatrix,
    config: SimConfig,
    backend,
    run_index: int,
    stage: int,
) -> tuple[list[DecodedLightpath], bool]:
    scen_rng = make_rng(config.seed, run_index, stage, _STREAM_SCENARIOS)
    sample = sample_scenarios(
        config.traffic, state.topology.num_nodes, config.scenario_count, scen_rng
    )
    spec = FormulationSpec(
        Problem.SMAX_RWA, Relaxation.IP_LP, state, new_demand=demand, scenarios=sample
    )
    bconfig = BendersConfig(method=config.method, time_limit_seconds=config.policy_time_limit)
    result = benders.solve(spec, sample, bconfig, config.solver, backend)
    if result.status is SolveStatus.OPTIMAL:
        return result.first_stage, False
    decoded, _ = _grant_deterministic(state, demand, config, backend)
    return decoded, True


def run_defrag(topo: Topology, config: SimConfig, run_index: int = 0) -> SimTrace:
    """One defragmentation run: reroute, drop, then grant new arrivals."""
    if config.policy not in _DEFRAG:
        raise ValueError(f"{config.policy.value} is not a defragmentation policy")
    work_topo = topo.with_wavelengths(config.wavelengths)
    backend = get_backend(config.engine)
    init_rng = make_rng(config.seed, run_index, 0, _STREAM_INITIAL)
    state = random_initial_state(work_topo, config.initial_requests, config.traffic, init_rng)
    records: list[StageRecord] = []
    cum_arrivals = 0
    cum_granted = 0
    for stage in range(1, config.horizon + 1):
        fallback = False
        if state.connections:
            state, fallback = _defragment(state, config, backend, run_index, stage)
        post_defrag_usage = state.spectrum_usage()
        state = drop_expired(state, stage)

        rng = make_rng(config.seed, run_index, stage, _STREAM_ARRIVALS)
        requests = sample_requests(config.traffic, work_topo.num_nodes, rng)
        demand = DemandMatrix.from_mapping(_count_pairs(pair for pair, _ in requests))
        decoded: list[DecodedLightpath] = []
        if demand:
            decoded, grant_fallback = _grant_deterministic(state, demand, config, backend)
            fallback = fallback or grant_fallback
        state = apply_provisioning(state, _assign_requests(decoded, requests, stage))
        cum_arrivals += len(requests)
        cum_granted += len(decoded)
        records.append(
            StageRecord(
                stage=stage,
                arrivals=len(requests),
                granted=len(decoded),
                blocked=len(requests) - len(decoded),
                cum_arrivals=cum_arrivals,
                cum_granted=cum_granted,
                gos=(cum_granted / cum_arrivals) if cum_arrivals else 1.0,
                spectrum_usage=state.spectrum_usage(),
                post_defrag_usage=post_defrag_usage,
                fallback=fallback,
            )
        )
    return SimTrace(config.policy.value, config.seed, run_index, tuple(records))


def _defragment(
    state: NetworkState, config: SimConfig, backend, run_index: int, stage: int
) -> tuple[NetworkState, bool]:
    """Compute the rerouting target and migrate the current connections to it."""
    demand = DemandMatrix.from_mapping(state.demand_counts())
    fallback = False
    decoded: list[DecodedLightpath] | None = None
    if config.policy is Policy.SMAX_LR_DEFRAG:
        scen_rng = make_rng(config.seed, run_index, stage, _STREAM_SCENARIOS)
        sample = sample_scenarios(
            config.traffic, state.topology.num_nodes, config.scenario_count, scen_rng
        )
        spec = FormulationSpec(
            Problem.SMAX_LR, Relaxation.IP_LP, state, current_demand=demand, scenarios=sample
        )
        bconfig = BendersConfig(method=config.method, time_limit_seconds=config.policy_time_limit)
        result = benders.solve(spec, sample, bconfig, config.solver, backend)
        if result.status is SolveStatus.OPTIMAL:
            decoded = result.first_stage
        else:
            fallback = True
    if decoded is None:
        spec = FormulationSpec(Problem.MIN_RWA, Relaxation.IP_IP, state, current_demand=demand)
        model = build_first_stage(spec)
        solver = replace(config.solver, time_limit_seconds=config.policy_time_limit)
        mip = backend.solve_mip(model, solver)
        if mip.incumbent is None:
            # Keep the current provisioning; nothing valid to migrate to.
            return state, True
        decoded = decode_provisioning(spec, model, mip.incumbent)
        fallback = fallback or (mip.status is not SolveStatus.OPTIMAL)

    new_connections = _map_target_to_connections(state, decoded)
    return rebuild_with_connections(state, new_connections), fallback


def _map_target_to_connections(
    state: NetworkState, decoded: Sequence[DecodedLightpath]
) -> list[ActiveConnection]:
    """Give every existing connection a lightpath from the rerouting target."""
    by_pair: dict[Pair, list[DecodedLightpath]] = {}
    for lp in decoded:
        by_pair.setdefault((lp.source, lp.destination), []).append(lp)
    connections: list[ActiveConnection] = []
    for pair in sorted(by_pair):
        current = sorted(
            (c for c in state.connections if (c.source, c.destination) == pair),
            key=lambda c: c.expiry_stage,
        )
        paths = by_pair[pair]
        if len(current) != len(paths):
            raise SimulationError(
                f"rerouting target grants {len(paths)} lightpaths for pair {pair}, "
                f"but {len(current)} connections are active"
            )
        for conn, lp in zip(current, paths):
            connections.append(
                ActiveConnection(conn.source, conn.destination, lp.wavelength, lp.path, conn.expiry_stage)
            )
    return connections


def _count_pairs(pairs) -> dict[Pair, int]:
    counts: dict[Pair, int] = {}
    for pair in pairs:
        counts[pair] = counts.get(pair, 0) + 1
    return counts


# ---------------------------------------------------------------------------
# experiments over repetitions


def _run_one(topo: Topology, config: SimConfig, run_index: int) -> SimTrace:
    if config.policy in _PROVISIONING:
        return run_provisioning(topo, config, run_index)
    return run_defrag(topo, config, run_index)


def run_experiment(topo: Topology, config: SimConfig, threads: int = 1) -> list[SimTrace]:
    """All repetitions of one policy; deterministic regardless of thread count."""
    runs = range(config.repetitions)
    if threads <= 1:
        return [_run_one(topo, config, i) for i in runs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(_run_one, topo, config, i) for i in runs]
        return [f.result() for f in futures]


def compare(traces_a: Sequence[SimTrace], traces_b: Sequence[SimTrace]) -> list[dict]:
    """Per-stage relative differences (A vs B), averaged over paired runs.

    Positive ``rel_granted_pct``/``rel_gos_pct`` means A grants more;
    positive ``rel_spectrum_pct`` means A occupies more wavelinks.  Counts
    are compared cumulatively; denominators are floored at one count (or at
    1e-9 for the grade of service) so empty early stages stay finite.
    """
    if len(traces_a) != len(traces_b):
        raise ValueError("trace lists differ in length")
    by_run_b = {t.run_index: t for t in traces_b}
    rows: list[dict] = []
    stages = len(traces_a[0].records)
    diffs: dict[str, np.ndarray] = {
        name: np.zeros((len(traces_a), stages))
        for name in ("granted", "gos", "spectrum")
    }
    for i, ta in enumerate(traces_a):
        tb = by_run_b.get(ta.run_index)
        if tb is None or len(tb.records) != len(ta.records):
            raise ValueError(f"run {ta.run_index}: no matching trace or horizon mismatch")
        for t, (ra, rb) in enumerate(zip(ta.records, tb.records)):
            if ra.arrivals != rb.arrivals:
                raise ValueError(f"run {ta.run_index} stage {ra.stage}: arrival streams differ")
            diffs["granted"][i, t] = 100.0 * (ra.cum_granted - rb.cum_granted) / max(rb.cum_granted, 1)
            diffs["gos"][i, t] = 100.0 * (ra.gos - rb.gos) / max(rb.gos, 1e-9)
            diffs["spectrum"][i, t] = 100.0 * (ra.spectrum_usage - rb.spectrum_usage) / max(
                rb.spectrum_usage, 1
            )
    for t in range(stages):
        row = {"stage": t + 1}
        for name, col in (("granted", "granted"), ("gos", "gos"), ("spectrum", "spectrum")):
            series = diffs[col][:, t]
            row[f"rel_{name}_pct"] = float(np.mean(series))
            row[f"rel_{name}_std"] = float(np.std(series, ddof=1)) if len(series) > 1 else 0.0
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# CSV output


_TRACE_FIELDS = [
    "stage",
    "arrivals",
    "granted",
    "blocked",
    "cum_arrivals",
    "cum_granted",
    "gos",
    "spectrum_usage",
    "post_defrag_usage",
    "fallback",
]


def write_trace_csv(trace: SimTrace, stream: IO[str]) -> None:
    writer = csv.DictWriter(stream, fieldnames=["policy", "seed", "run"] + _TRACE_FIELDS)
    writer.writeheader()
    for r in trace.records:
        row = {"policy": trace.policy, "seed": trace.seed, "run": trace.run_index}
        row.update({name: getattr(r, name) for name in _TRACE_FIELDS})
        writer.writerow(row)


def write_comparison_csv(rows: Sequence[dict], stream: IO[str]) -> None:
    if not rows:
        return
    writer = csv.DictWriter(stream, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    writer.writerows(rows)
