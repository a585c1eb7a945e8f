"""Constraint-system builders for the RWA problem family.

Link-based formulations over binary wavelink-assignment variables:

* first stage: one ``x`` column per (pair, arc, wavelength) on available
  wavelinks, with wavelink-conflict rows, per-wavelength flow conservation,
  and per-pair demand rows (upper bounds when granting is optional, equality
  when every current connection must be rerouted);
* recourse: the same structure in ``y`` columns for one future-demand
  scenario on the capacity left over by the first stage, plus ``z`` columns
  counting grants per pair;
* extensive form: first stage plus one recourse block per scenario, tied
  together through the shared capacity rows and per-scenario value columns
  ``eta`` weighted by 1/|sample|;
* decomposition master: first stage plus ``eta`` columns, optionally with
  per-arc load columns ``beta`` linked to the x columns.

Cycles through a pair's own endpoints are excluded by construction: columns
on arcs entering the source or leaving the destination are never created.
Integral solutions decode into lightpaths by repeated extraction of the
lexicographically smallest simple path from each (pair, wavelength) flow
support; leftover circulations (possible in alternative optima, never
objective-improving) are discarded.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .lpmodel import INF, LpModel, ModelError, RowKey, VarKey
from .topology import NetworkState, Topology
from .traffic import DemandMatrix, Pair, ScenarioSample

_USAGE_CLAMP = 1e-6  # absorb solver round-off in first-stage values


class Problem(enum.Enum):
    MAX_RWA = "maxRWA"
    MIN_RWA = "minRWA"
    SMAX_RWA = "SmaxRWA"
    SMAX_LR = "SmaxLR"


class Relaxation(enum.Enum):
    IP_IP = "IP-IP"
    IP_LP = "IP-LP"
    LP_LP = "LP-LP"


_REROUTING = (Problem.MIN_RWA, Problem.SMAX_LR)
_STOCHASTIC = (Problem.SMAX_RWA, Problem.SMAX_LR)


@dataclass
class FormulationSpec:
    """One problem instance: topology state, demand, scenarios, relaxation."""

    problem: Problem
    relaxation: Relaxation
    state: NetworkState
    new_demand: DemandMatrix | None = None
    current_demand: DemandMatrix | None = None
    scenarios: ScenarioSample | None = None

    def __post_init__(self) -> None:
        if self.problem in _REROUTING:
            if self.current_demand is None:
                raise ModelError(f"{self.problem.value} requires current_demand")
        elif self.new_demand is None:
            raise ModelError(f"{self.problem.value} requires new_demand")
        if self.problem in _STOCHASTIC and self.scenarios is None:
            self.scenarios = ScenarioSample(())

    @property
    def topology(self) -> Topology:
        return self.state.topology

    @property
    def is_stochastic(self) -> bool:
        return self.problem in _STOCHASTIC

    def first_stage_demand(self) -> DemandMatrix:
        if self.problem in _REROUTING:
            return self.current_demand  # type: ignore[return-value]
        return self.new_demand  # type: ignore[return-value]

    def demand_sense(self) -> str:
        # Rerouting must re-grant every current connection; provisioning may reject.
        return "=" if self.problem in _REROUTING else "<="

    def wavelinks(self) -> dict[int, frozenset[int]]:
        """Available wavelinks per wavelength (full plant when rerouting)."""
        cached = self.__dict__.get("_wavelinks")
        if cached is None:
            topo = self.topology
            if self.problem in _REROUTING:
                every = frozenset(a.id for a in topo.arcs)
                cached = {w: every for w in topo.wavelengths}
            else:
                cached = {w: self.state.available(w) for w in topo.wavelengths}
            self.__dict__["_wavelinks"] = cached
        return cached

    def free_wavelength_count(self, arc_id: int) -> int:
        return sum(1 for links in self.wavelinks().values() if arc_id in links)

    def scenario_list(self) -> tuple[DemandMatrix, ...]:
        return self.scenarios.scenarios if self.scenarios is not None else ()


@dataclass(frozen=True)
class DecodedLightpath:
    source: int
    destination: int
    wavelength: int
    path: tuple[int, ...]


# ---------------------------------------------------------------------------
# column/row helpers


def _assignment_arcs(spec: FormulationSpec, pair: Pair, w: int) -> list[int]:
    """Arc ids a (pair, wavelength) column may use, in id order."""
    topo = spec.topology
    s, d = pair
    banned = {a.id for a in topo.in_arcs(s)} | {a.id for a in topo.out_arcs(d)}
    return sorted(a for a in spec.wavelinks()[w] if a not in banned)


def _add_assignment_block(
    model: LpModel,
    spec: FormulationSpec,
    kind: str,
    pairs: Iterable[Pair],
    *,
    scenario: int | None,
    integer: bool,
    upper: float,
) -> dict[tuple[Pair, int, int], int]:
    """Create assignment columns for all (pair, arc, wavelength) slots."""
    cols: dict[tuple[Pair, int, int], int] = {}
    for pair in pairs:
        for w in spec.topology.wavelengths:
            for arc_id in _assignment_arcs(spec, pair, w):
                key = VarKey(kind, pair=pair, arc=arc_id, wavelength=w, scenario=scenario)
                cols[(pair, arc_id, w)] = model.add_col(key, 0.0, upper, 0.0, integer)
    return cols


def _add_flow_rows(
    model: LpModel,
    spec: FormulationSpec,
    kind: str,
    pairs: Iterable[Pair],
    cols: dict[tuple[Pair, int, int], int],
    scenario: int | None,
) -> None:
    """Per-wavelength flow conservation at every non-endpoint node."""
    topo = spec.topology
    for pair in pairs:
        s, d = pair
        for w in topo.wavelengths:
            for v in topo.nodes:
                if v == s or v == d:
                    continue
                coeffs: dict[int, float] = {}
                for arc in topo.out_arcs(v):
                    j = cols.get((pair, arc.id, w))
                    if j is not None:
                        coeffs[j] = coeffs.get(j, 0.0) + 1.0
                for arc in topo.in_arcs(v):
                    j = cols.get((pair, arc.id, w))
                    if j is not None:
                        coeffs[j] = coeffs.get(j, 0.0) - 1.0
                coeffs = {j: a for j, a in coeffs.items() if a != 0.0}
                if coeffs:
                    model.add_row(
                        RowKey(kind, pair=pair, wavelength=w, node=v, scenario=scenario),
                        coeffs,
                        "=",
                        0.0,
                    )


def _source_cols(
    spec: FormulationSpec, pair: Pair, cols: dict[tuple[Pair, int, int], int]
) -> list[int]:
    """Columns on arcs leaving the pair's source (one per granted lightpath)."""
    s = pair[0]
    out = {a.id for a in spec.topology.out_arcs(s)}
    return [j for (p, arc_id, _w), j in cols.items() if p == pair and arc_id in out]


def scenario_demand_total(matrix: DemandMatrix) -> int:
    return matrix.total


# ---------------------------------------------------------------------------
# first stage


def build_first_stage(spec: FormulationSpec) -> LpModel:
    """Deterministic model over the first-stage assignment columns.

    Objective: granted-request count for maxRWA/SmaxRWA, negated wavelink
    count for minRWA, zero for SmaxLR (whose objective is purely recourse).
    """
    model = LpModel(name=f"{spec.problem.value}-first-stage")
    demand = spec.first_stage_demand()
    pairs = demand.pairs
    integer = spec.relaxation is not Relaxation.LP_LP
    cols = _add_assignment_block(model, spec, "x", pairs, scenario=None, integer=integer, upper=1.0)

    if spec.problem in (Problem.MAX_RWA, Problem.SMAX_RWA):
        for pair in pairs:
            for j in _source_cols(spec, pair, cols):
                model.set_objective(j, 1.0)
    elif spec.problem is Problem.MIN_RWA:
        for j in cols.values():
            model.set_objective(j, -1.0)

    _add_conflict_rows(model, spec, cols)
    _add_flow_rows(model, spec, "flow", pairs, cols, None)
    sense = spec.demand_sense()
    for pair in pairs:
        sources = _source_cols(spec, pair, cols)
        model.add_row(
            RowKey("demand", pair=pair),
            {j: 1.0 for j in sources},
            sense,
            float(demand.count(pair)),
        )
    return model


def _add_conflict_rows(
    model: LpModel, spec: FormulationSpec, cols: dict[tuple[Pair, int, int], int]
) -> None:
    per_link: dict[tuple[int, int], list[int]] = {}
    for (_pair, arc_id, w), j in cols.items():
        per_link.setdefault((arc_id, w), []).append(j)
    for (arc_id, w), js in sorted(per_link.items()):
        model.add_row(
            RowKey("conflict", arc=arc_id, wavelength=w),
            {j: 1.0 for j in js},
            "<=",
            1.0,
        )


# ---------------------------------------------------------------------------
# recourse


def usage_from_values(model: LpModel, values: np.ndarray) -> dict[tuple[int, int], float]:
    """Aggregate first-stage values into per-wavelink usage sums."""
    usage: dict[tuple[int, int], float] = {}
    for j, col in enumerate(model.cols):
        if col.key.kind == "x":
            key = (col.key.arc, col.key.wavelength)
            usage[key] = usage.get(key, 0.0) + float(values[j])
    return usage


def link_load_from_values(model: LpModel, values: np.ndarray) -> dict[int, float]:
    """Per-arc first-stage load (sum of x over wavelengths and pairs)."""
    load: dict[int, float] = {}
    for j, col in enumerate(model.cols):
        if col.key.kind == "x":
            load[col.key.arc] = load.get(col.key.arc, 0.0) + float(values[j])
        elif col.key.kind == "beta":
            load.setdefault(col.key.arc, 0.0)
    return load


def first_stage_value(model: LpModel, values: np.ndarray) -> float:
    """The first-stage part of the objective (x columns only)."""
    return float(
        sum(col.objective * values[j] for j, col in enumerate(model.cols) if col.key.kind == "x")
    )


def build_recourse(
    spec: FormulationSpec,
    usage: Mapping[tuple[int, int], float],
    demand: DemandMatrix,
    *,
    scenario: int = 0,
    integer: bool = False,
) -> LpModel:
    """Single-scenario second-stage model on the capacity left by ``usage``.

    ``usage`` maps (arc, wavelength) to the first-stage load on that
    wavelink; loads above one (beyond round-off) are a conflict-violating
    first stage and raise.  By default the recourse is continuous with
    unbounded-above columns, which is what the dual-based cuts require;
    ``integer=True`` gives the exact integral recourse instead.
    """
    model = LpModel(name=f"recourse-s{scenario}")
    pairs = demand.pairs
    upper = 1.0 if integer else INF
    cols = _add_assignment_block(
        model, spec, "y", pairs, scenario=scenario, integer=integer, upper=upper
    )

    per_link: dict[tuple[int, int], list[int]] = {}
    for (_pair, arc_id, w), j in cols.items():
        per_link.setdefault((arc_id, w), []).append(j)
    for (arc_id, w), js in sorted(per_link.items()):
        load = float(usage.get((arc_id, w), 0.0))
        if load > 1.0 + _USAGE_CLAMP:
            raise ModelError(f"first-stage load {load:.6f} exceeds capacity on (arc {arc_id}, wavelength {w})")
        rhs = max(0.0, 1.0 - load)
        model.add_row(
            RowKey("capacity", arc=arc_id, wavelength=w, scenario=scenario),
            {j: 1.0 for j in js},
            "<=",
            rhs,
        )

    _add_flow_rows(model, spec, "flow", pairs, cols, scenario)
    _add_grant_rows(model, spec, demand, cols, scenario, integer)
    return model


def _add_grant_rows(
    model: LpModel,
    spec: FormulationSpec,
    demand: DemandMatrix,
    cols: dict[tuple[Pair, int, int], int],
    scenario: int,
    integer: bool,
    objective: float = 1.0,
) -> None:
    """Grant-count columns z with their demand caps and linking rows."""
    for pair in demand.pairs:
        r = float(demand.count(pair))
        z = model.add_col(
            VarKey("z", pair=pair, scenario=scenario),
            0.0,
            r if integer else INF,
            objective,
            integer,
        )
        model.add_row(RowKey("demand", pair=pair, scenario=scenario), {z: 1.0}, "<=", r)
        coeffs = {z: 1.0}
        for j in _source_cols(spec, pair, cols):
            coeffs[j] = -1.0
        model.add_row(RowKey("grant", pair=pair, scenario=scenario), coeffs, "=", 0.0)


def build_relaxed_recourse(
    spec: FormulationSpec,
    link_load: Mapping[int, float],
    demand: DemandMatrix,
    *,
    scenario: int = 0,
) -> LpModel:
    """Second-stage relaxation in aggregate per-arc capacity.

    Wavelink conflicts are not enforced: each arc only caps the total flow
    across wavelengths at (free wavelengths minus first-stage load), plus a
    unit cap per individual wavelink.  Always at least as large as the true
    recourse optimum; its duals yield cuts in the per-arc load columns.
    """
    model = LpModel(name=f"relaxed-recourse-s{scenario}")
    pairs = demand.pairs
    cols = _add_assignment_block(model, spec, "y", pairs, scenario=scenario, integer=False, upper=INF)

    per_arc: dict[int, list[int]] = {}
    per_link: dict[tuple[int, int], list[int]] = {}
    for (_pair, arc_id, w), j in cols.items():
        per_arc.setdefault(arc_id, []).append(j)
        per_link.setdefault((arc_id, w), []).append(j)
    for arc_id, js in sorted(per_arc.items()):
        free = float(spec.free_wavelength_count(arc_id))
        load = float(link_load.get(arc_id, 0.0))
        if load > free + _USAGE_CLAMP * max(1.0, free):
            raise ModelError(f"first-stage load {load:.6f} exceeds free wavelengths on arc {arc_id}")
        model.add_row(
            RowKey("agg_capacity", arc=arc_id, scenario=scenario),
            {j: 1.0 for j in js},
            "<=",
            max(0.0, free - load),
        )
    for (arc_id, w), js in sorted(per_link.items()):
        model.add_row(
            RowKey("unit", arc=arc_id, wavelength=w, scenario=scenario),
            {j: 1.0 for j in js},
            "<=",
            1.0,
        )

    _add_flow_rows(model, spec, "flow", pairs, cols, scenario)
    _add_grant_rows(model, spec, demand, cols, scenario, integer=False)
    return model


# ---------------------------------------------------------------------------
# extensive form and decomposition master


def _add_value_columns(model: LpModel, spec: FormulationSpec) -> list[int]:
    """Per-scenario recourse-value columns, averaged in the objective."""
    scenarios = spec.scenario_list()
    weight = 1.0 / len(scenarios) if scenarios else 0.0
    etas = []
    for k, matrix in enumerate(scenarios):
        etas.append(
            model.add_col(VarKey("eta", scenario=k), 0.0, float(matrix.total), weight, False)
        )
    return etas


def build_extensive(spec: FormulationSpec) -> LpModel:
    """Deterministic equivalent: per-scenario recourse copies around one first stage."""
    if not spec.scenario_list():
        raise ModelError("extensive form needs at least one scenario")
    model = build_first_stage(spec)
    model.name = f"{spec.problem.value}-extensive"
    x_cols: dict[tuple[Pair, int, int], int] = {
        (c.key.pair, c.key.arc, c.key.wavelength): j
        for j, c in enumerate(model.cols)
        if c.key.kind == "x"
    }
    etas = _add_value_columns(model, spec)
    integer = spec.relaxation is Relaxation.IP_IP

    x_per_link: dict[tuple[int, int], list[int]] = {}
    for (_pair, arc_id, w), xj in x_cols.items():
        x_per_link.setdefault((arc_id, w), []).append(xj)

    for k, matrix in enumerate(spec.scenario_list()):
        pairs = matrix.pairs
        upper = 1.0 if integer else INF
        y_cols = _add_assignment_block(
            model, spec, "y", pairs, scenario=k, integer=integer, upper=upper
        )
        per_link: dict[tuple[int, int], list[int]] = {}
        for (_pair, arc_id, w), j in y_cols.items():
            per_link.setdefault((arc_id, w), []).append(j)
        for (arc_id, w), js in sorted(per_link.items()):
            coeffs = {j: 1.0 for j in js}
            for xj in x_per_link.get((arc_id, w), ()):
                coeffs[xj] = 1.0
            model.add_row(
                RowKey("capacity", arc=arc_id, wavelength=w, scenario=k), coeffs, "<=", 1.0
            )
        _add_flow_rows(model, spec, "flow", pairs, y_cols, k)
        _add_grant_rows(model, spec, matrix, y_cols, k, integer, objective=0.0)
        z_cols = [
            j
            for j, c in enumerate(model.cols)
            if c.key.kind == "z" and c.key.scenario == k
        ]
        coeffs = {etas[k]: 1.0}
        coeffs.update({j: -1.0 for j in z_cols})
        model.add_row(RowKey("recourse_value", scenario=k), coeffs, "<=", 0.0)
    return model


def build_master(spec: FormulationSpec, *, with_link_load: bool) -> LpModel:
    """Decomposition master: first stage plus recourse-value columns.

    With ``with_link_load``, adds one continuous per-arc load column tied to
    the x columns by an equality row, for separating aggregate-capacity cuts.
    """
    model = build_first_stage(spec)
    model.name = f"{spec.problem.value}-master"
    _add_value_columns(model, spec)
    if with_link_load:
        per_arc: dict[int, list[int]] = {a.id: [] for a in spec.topology.arcs}
        for j, c in enumerate(model.cols):
            if c.key.kind == "x":
                per_arc[c.key.arc].append(j)
        for arc_id in sorted(per_arc):
            beta = model.add_col(
                VarKey("beta", arc=arc_id),
                0.0,
                float(spec.free_wavelength_count(arc_id)),
                0.0,
                False,
            )
            coeffs = {j: 1.0 for j in per_arc[arc_id]}
            coeffs[beta] = -1.0
            model.add_row(RowKey("link_load", arc=arc_id), coeffs, "=", 0.0)
    return model


# ---------------------------------------------------------------------------
# decoding integral solutions into lightpaths


def decode_provisioning(
    spec: FormulationSpec, model: LpModel, values: np.ndarray, kind: str = "x"
) -> list[DecodedLightpath]:
    """Split an integral assignment into concrete lightpaths.

    Per (pair, wavelength), repeatedly extracts the simple path that is
    lexicographically smallest in arc ids; circulations left over in the
    flow support are dropped (they never contribute granted requests).
    """
    topo = spec.topology
    support: dict[tuple[Pair, int], set[int]] = {}
    for j, col in enumerate(model.cols):
        if col.key.kind == kind and values[j] > 0.5:
            support.setdefault((col.key.pair, col.key.wavelength), set()).add(col.key.arc)
    decoded: list[DecodedLightpath] = []
    for (pair, w) in sorted(support):
        arcs = support[(pair, w)]
        s, d = pair
        out_of_source = {a.id for a in topo.out_arcs(s)}
        n_paths = len(arcs & out_of_source)
        for _ in range(n_paths):
            path = _extract_path(topo, arcs, s, d)
            if path is None:
                raise ModelError(
                    f"assignment support for pair {pair} on wavelength {w} does not decompose into paths"
                )
            decoded.append(DecodedLightpath(s, d, w, tuple(path)))
            arcs -= set(path)
    return decoded


def _extract_path(topo: Topology, arcs: set[int], s: int, d: int) -> list[int] | None:
    """Smallest-arc-id simple path from s to d inside ``arcs`` (DFS with backtracking)."""

    def dfs(node: int, used: list[int], visited: set[int]) -> list[int] | None:
        if node == d:
            return used
        for arc in topo.out_arcs(node):
            if arc.id in arcs and arc.id not in used and arc.head not in visited:
                found = dfs(arc.head, used + [arc.id], visited | {arc.head})
                if found is not None:
                    return found
        return None

    return dfs(s, [], {s})
