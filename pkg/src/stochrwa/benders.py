"""Multi-cut decomposition solver for the two-stage problems.

The master holds the first-stage columns plus one recourse-value column per
scenario; subproblem duals turn into optimality cuts.  Two cut families:

* ``x_cut``: from the true per-scenario recourse LP; coefficients live on
  the first-stage assignment columns.  A complete set of these is exact for
  the second-stage-relaxed problem.
* ``beta_cut``: from the aggregate-capacity relaxation of the recourse,
  whose coefficients live on the per-arc load columns.  Cheaper and denser
  in information per cut, but the relaxation ignores wavelength conflicts,
  so these cuts alone only bound the problem from above.

Method variants: EXTENSIVE solves the deterministic equivalent directly;
BENDERS_x separates x-cuts at integral nodes; BENDERS_xbeta additionally
separates beta-cuts (at fractional nodes too, when enabled) and can presolve
beta-cuts against the fully relaxed master until none is violated, seeding
the branch-and-cut run.  Granting nothing is always second-stage feasible,
so only optimality cuts are ever needed; a non-optimal recourse solve is a
hard error, not a feasibility cut.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .formulations import (
    DecodedLightpath,
    FormulationSpec,
    Relaxation,
    build_first_stage,
    build_extensive,
    build_master,
    build_recourse,
    build_relaxed_recourse,
    decode_provisioning,
    first_stage_value,
    link_load_from_values,
    usage_from_values,
)
from .lpmodel import LpModel, RowKey, VarKey
from .solvers import (
    DUALS,
    LAZY_CUTS,
    CutRow,
    MipSolution,
    NodeSolution,
    SolveStatus,
    SolverBackend,
    SolverConfig,
    SolverError,
    get_backend,
    require_capabilities,
)
from .traffic import DemandMatrix, ScenarioSample


class Method(enum.Enum):
    EXTENSIVE = "EXTENSIVE"
    BENDERS_X = "BENDERS_x"
    BENDERS_XBETA = "BENDERS_xbeta"


@dataclass
class BendersConfig:
    """Decomposition knobs; BENDERS_x forces the beta machinery off."""

    method: Method = Method.BENDERS_XBETA
    preprocess_lp_lp: bool = True
    separate_beta_at_fractional: bool = True
    tol_cut: float = 1e-5
    time_limit_seconds: float | None = None
    max_preprocess_rounds: int = 1000

    def __post_init__(self) -> None:
        if isinstance(self.method, str):
            self.method = Method(self.method)
        if self.tol_cut <= 0:
            raise ValueError("tol_cut must be positive")
        if self.method is not Method.BENDERS_XBETA:
            self.preprocess_lp_lp = False
            self.separate_beta_at_fractional = False


@dataclass(frozen=True)
class Cut:
    """One optimality cut: value_col <= coefficients . vars + constant."""

    family: str  # "x_cut" or "beta_cut"
    scenario: int
    coefficients: tuple[tuple[int, float], ...]  # master column -> coefficient
    constant: float

    def rhs_at(self, values: np.ndarray) -> float:
        return self.constant + sum(c * float(values[j]) for j, c in self.coefficients)


class CutPool:
    """Append-only cut store with per-family counters and dedup."""

    def __init__(self, tol_cut: float = 1e-5):
        self.tol_cut = tol_cut
        self.cuts: list[Cut] = []
        self._seen: set[tuple] = set()

    def add(self, cut: Cut) -> bool:
        sig = (
            cut.family,
            cut.scenario,
            round(cut.constant, 9),
            tuple((j, round(c, 9)) for j, c in cut.coefficients),
        )
        if sig in self._seen:
            return False
        self._seen.add(sig)
        self.cuts.append(cut)
        return True

    def count(self, family: str) -> int:
        return sum(1 for c in self.cuts if c.family == family)

    def __len__(self) -> int:
        return len(self.cuts)


class RecourseOracle:
    """One scenario's second-stage LP, rebuilt-free across first stages.

    The model is constructed once against an empty first stage; solving for
    a particular first-stage load only rewrites the capacity right-hand
    sides.  Duals of the capacity and demand rows are exposed for cuts.
    """

    def __init__(
        self,
        spec: FormulationSpec,
        demand: DemandMatrix,
        scenario: int,
        backend: SolverBackend,
        config: SolverConfig,
    ):
        self.spec = spec
        self.demand = demand
        self.scenario = scenario
        self.backend = backend
        self.config = config
        self.model = build_recourse(spec, {}, demand, scenario=scenario)
        self._cap_rows: list[tuple[int, tuple[int, int]]] = []
        self._dem_rows: list[tuple[int, tuple[int, int], float]] = []
        for i, row in enumerate(self.model.rows):
            if row.key.kind == "capacity":
                self._cap_rows.append((i, (row.key.arc, row.key.wavelength)))
            elif row.key.kind == "demand":
                self._dem_rows.append((i, row.key.pair, row.rhs))

    @property
    def total_demand(self) -> int:
        return self.demand.total

    def solve(self, usage: Mapping[tuple[int, int], float]) -> tuple[float, np.ndarray]:
        """Optimal recourse value and full dual vector for this load."""
        if self.model.num_cols == 0:
            return 0.0, np.zeros(self.model.num_rows)
        for i, link in self._cap_rows:
            load = float(usage.get(link, 0.0))
            if load > 1.0 + 1e-6:
                raise SolverError(f"first-stage load {load} over capacity on wavelink {link}")
            self.model.set_rhs(i, max(0.0, 1.0 - load))
        sol = self.backend.solve_lp(self.model, self.config)
        if sol.status is not SolveStatus.OPTIMAL:
            raise SolverError(
                f"recourse solve for scenario {self.scenario} ended {sol.status.value}; "
                "granting nothing is always feasible, so this is a solver failure"
            )
        return sol.objective, sol.duals

    def value(self, usage: Mapping[tuple[int, int], float]) -> float:
        return self.solve(usage)[0]

    def make_cut(self, duals: np.ndarray, x_cols_per_link: Mapping[tuple[int, int], list[int]]) -> Cut:
        """Assemble the x-cut from capacity and demand duals."""
        constant = 0.0
        coeffs: dict[int, float] = {}
        for i, link in self._cap_rows:
            pi = float(duals[i])
            if pi <= 1e-12:
                continue
            constant += pi  # full wavelink capacity
            for j in x_cols_per_link.get(link, ()):
                coeffs[j] = coeffs.get(j, 0.0) - pi
        for i, _pair, r in self._dem_rows:
            pi = float(duals[i])
            if abs(pi) > 1e-12:
                constant += pi * r
        return Cut("x_cut", self.scenario, tuple(sorted(coeffs.items())), constant)


class RelaxedRecourseOracle:
    """Aggregate-capacity relaxation of one scenario's recourse."""

    def __init__(
        self,
        spec: FormulationSpec,
        demand: DemandMatrix,
        scenario: int,
        backend: SolverBackend,
        config: SolverConfig,
    ):
        self.spec = spec
        self.demand = demand
        self.scenario = scenario
        self.backend = backend
        self.config = config
        self.model = build_relaxed_recourse(spec, {}, demand, scenario=scenario)
        self._agg_rows: list[tuple[int, int, float]] = []  # (row, arc, free count)
        self._dem_rows: list[tuple[int, float]] = []
        self._unit_rows: list[int] = []
        for i, row in enumerate(self.model.rows):
            if row.key.kind == "agg_capacity":
                self._agg_rows.append((i, row.key.arc, float(spec.free_wavelength_count(row.key.arc))))
            elif row.key.kind == "demand":
                self._dem_rows.append((i, row.rhs))
            elif row.key.kind == "unit":
                self._unit_rows.append(i)

    def solve(self, link_load: Mapping[int, float]) -> tuple[float, np.ndarray]:
        if self.model.num_cols == 0:
            return 0.0, np.zeros(self.model.num_rows)
        for i, arc, free in self._agg_rows:
            load = float(link_load.get(arc, 0.0))
            if load > free + 1e-6 * max(1.0, free):
                raise SolverError(f"first-stage load {load} over free wavelengths on arc {arc}")
            self.model.set_rhs(i, max(0.0, free - load))
        sol = self.backend.solve_lp(self.model, self.config)
        if sol.status is not SolveStatus.OPTIMAL:
            raise SolverError(
                f"relaxed recourse for scenario {self.scenario} ended {sol.status.value}"
            )
        return sol.objective, sol.duals

    def make_cut(self, duals: np.ndarray, beta_cols: Mapping[int, int]) -> Cut:
        constant = 0.0
        coeffs: dict[int, float] = {}
        for i, arc, free in self._agg_rows:
            pi = float(duals[i])
            if pi <= 1e-12:
                continue
            constant += pi * free
            beta_j = beta_cols.get(arc)
            if beta_j is not None:
                coeffs[beta_j] = coeffs.get(beta_j, 0.0) - pi
        for i, r in self._dem_rows:
            pi = float(duals[i])
            if abs(pi) > 1e-12:
                constant += pi * r
        for i in self._unit_rows:
            pi = float(duals[i])
            if pi > 1e-12:
                constant += pi
        return Cut("beta_cut", self.scenario, tuple(sorted(coeffs.items())), constant)


def separate_x_cut(
    oracle: RecourseOracle,
    eta_hat: float,
    usage: Mapping[tuple[int, int], float],
    x_cols_per_link: Mapping[tuple[int, int], list[int]],
    tol_cut: float,
) -> Cut | None:
    """Return an x-cut when the master overestimates this scenario's recourse."""
    value, duals = oracle.solve(usage)
    if eta_hat <= value + tol_cut:
        return None
    return oracle.make_cut(duals, x_cols_per_link)


def separate_beta_cut(
    oracle: RelaxedRecourseOracle,
    eta_hat: float,
    link_load: Mapping[int, float],
    beta_cols: Mapping[int, int],
    tol_cut: float,
) -> Cut | None:
    """Return a beta-cut when the relaxed recourse is overestimated."""
    value, duals = oracle.solve(link_load)
    if eta_hat <= value + tol_cut:
        return None
    return oracle.make_cut(duals, beta_cols)


@dataclass
class BendersResult:
    status: SolveStatus
    objective: float
    first_stage: list[DecodedLightpath]
    first_stage_objective: float
    verified_objective: float | None
    mip: MipSolution | None
    pool: CutPool
    method: Method
    solve_seconds: float
    master: LpModel | None = None
    incumbent: np.ndarray | None = None

    @property
    def gap_pct(self) -> float:
        if self.mip is None:
            return 0.0
        gap = self.mip.gap
        return 0.0 if not math.isfinite(gap) else 100.0 * gap

    def stats(self) -> dict:
        """The reporting columns: method, time, gap, cut counts, objective."""
        return {
            "method": self.method.value,
            "time_s": round(self.solve_seconds, 3),
            "gap_pct": round(self.gap_pct, 4) if self.mip is not None and self.mip.incumbent is not None else None,
            "n_beta_cuts": self.pool.count("beta_cut"),
            "n_x_cuts": self.pool.count("x_cut"),
            "objective": self.objective if math.isfinite(self.objective) else None,
        }


def preprocess_lp_lp(
    spec: FormulationSpec,
    master: LpModel,
    oracles: list[RelaxedRecourseOracle],
    pool: CutPool,
    backend: SolverBackend,
    config: SolverConfig,
    bconfig: BendersConfig,
    deadline: float,
) -> int:
    """Beta-cut loop against the fully relaxed master.

    Cuts are appended both to the relaxed copy and to ``master`` so the
    integer phase starts from the presolved outer approximation.  Stops when
    no scenario is violated, on round limit, or at the deadline (the partial
    pool is still valid).  Returns the number of rounds run.
    """
    if not oracles or master.num_cols == 0:
        return 0
    relaxed = master.copy()
    relaxed.relax_integrality()
    eta_cols = [relaxed.var_index(VarKey("eta", scenario=k)) for k in range(len(oracles))]
    beta_cols = {
        c.key.arc: j for j, c in enumerate(relaxed.cols) if c.key.kind == "beta"
    }
    rounds = 0
    while rounds < bconfig.max_preprocess_rounds and time.monotonic() < deadline:
        sol = backend.solve_lp(relaxed, config)
        if sol.status is not SolveStatus.OPTIMAL:
            break
        load = link_load_from_values(relaxed, sol.primal)
        added_any = False
        for k, oracle in enumerate(oracles):
            cut = separate_beta_cut(
                oracle, float(sol.primal[eta_cols[k]]), load, beta_cols, bconfig.tol_cut
            )
            if cut is not None and pool.add(cut):
                for mdl in (relaxed, master):
                    _install_cut(mdl, cut, len(pool.cuts))
                added_any = True
        rounds += 1
        if not added_any:
            break
    return rounds


def _install_cut(model: LpModel, cut: Cut, serial: int) -> None:
    eta = model.var_index(VarKey("eta", scenario=cut.scenario))
    coeffs = {eta: 1.0}
    for j, c in cut.coefficients:
        coeffs[j] = coeffs.get(j, 0.0) - c
    model.add_row(
        RowKey("cut", scenario=cut.scenario, serial=serial), coeffs, "<=", cut.constant
    )


def solve(
    spec: FormulationSpec,
    sample: ScenarioSample,
    bconfig: BendersConfig | None = None,
    config: SolverConfig | None = None,
    backend: SolverBackend | str = "simplex",
) -> BendersResult:
    """Solve the configured two-stage problem and decode the provisioning.

    Scope: the decomposition methods target the second-stage-relaxed model
    (first stage integral, recourse continuous); EXTENSIVE honors whatever
    relaxation the spec carries and is the exact route for small instances.
    An empty sample degenerates to the deterministic first-stage problem.
    """
    bconfig = bconfig or BendersConfig()
    config = config or SolverConfig()
    if isinstance(backend, str):
        backend = get_backend(backend)
    t0 = time.monotonic()
    total_limit = bconfig.time_limit_seconds or config.time_limit_seconds
    deadline = t0 + total_limit
    spec.scenarios = sample

    if bconfig.method is not Method.EXTENSIVE:
        require_capabilities(backend, frozenset((DUALS, LAZY_CUTS)))
        if spec.relaxation is not Relaxation.IP_LP:
            raise SolverError(
                f"{bconfig.method.value} targets the IP-LP relaxation, got {spec.relaxation.value}"
            )

    if len(sample) == 0 or bconfig.method is Method.EXTENSIVE:
        return _solve_monolithic(spec, sample, bconfig, config, backend, t0, deadline)

    with_beta = bconfig.method is Method.BENDERS_XBETA
    master = build_master(spec, with_link_load=with_beta)
    pool = CutPool(bconfig.tol_cut)
    if master.num_cols == 0:
        return BendersResult(
            SolveStatus.OPTIMAL, 0.0, [], 0.0, 0.0, None, pool, bconfig.method,
            time.monotonic() - t0,
        )

    oracles = [
        RecourseOracle(spec, matrix, k, backend, config)
        for k, matrix in enumerate(sample.scenarios)
    ]
    relaxed_oracles = (
        [
            RelaxedRecourseOracle(spec, matrix, k, backend, config)
            for k, matrix in enumerate(sample.scenarios)
        ]
        if with_beta
        else []
    )
    eta_cols = [master.var_index(VarKey("eta", scenario=k)) for k in range(len(sample))]
    beta_cols = {c.key.arc: j for j, c in enumerate(master.cols) if c.key.kind == "beta"}
    x_cols_per_link: dict[tuple[int, int], list[int]] = {}
    for j, c in enumerate(master.cols):
        if c.key.kind == "x":
            x_cols_per_link.setdefault((c.key.arc, c.key.wavelength), []).append(j)

    if bconfig.preprocess_lp_lp:
        preprocess_lp_lp(spec, master, relaxed_oracles, pool, backend, config, bconfig, deadline)

    def callback(node: NodeSolution) -> list[CutRow]:
        fresh: list[tuple[Cut, int]] = []
        if node.is_integral:
            usage = usage_from_values(master, node.values)
            load = link_load_from_values(master, node.values)
            for k in range(len(sample)):
                eta_hat = float(node.values[eta_cols[k]])
                cut = None
                if with_beta:
                    cut = separate_beta_cut(
                        relaxed_oracles[k], eta_hat, load, beta_cols, bconfig.tol_cut
                    )
                if cut is None:
                    cut = separate_x_cut(
                        oracles[k], eta_hat, usage, x_cols_per_link, bconfig.tol_cut
                    )
                if cut is not None and pool.add(cut):
                    fresh.append((cut, len(pool.cuts)))
        elif with_beta and bconfig.separate_beta_at_fractional:
            load = link_load_from_values(master, node.values)
            for k in range(len(sample)):
                cut = separate_beta_cut(
                    relaxed_oracles[k],
                    float(node.values[eta_cols[k]]),
                    load,
                    beta_cols,
                    bconfig.tol_cut,
                )
                if cut is not None and pool.add(cut):
                    fresh.append((cut, len(pool.cuts)))
        rows = []
        for cut, serial in fresh:
            eta = master.var_index(VarKey("eta", scenario=cut.scenario))
            coeffs = {eta: 1.0}
            for j, c in cut.coefficients:
                coeffs[j] = coeffs.get(j, 0.0) - c
            rows.append(
                CutRow(
                    RowKey("cut", scenario=cut.scenario, serial=serial),
                    tuple(coeffs.items()),
                    cut.constant,
                    cut.family,
                )
            )
        return rows

    mip_config = _remaining_config(config, deadline)
    mip = backend.solve_mip(master, mip_config, callback)
    elapsed = time.monotonic() - t0
    if mip.incumbent is None:
        return BendersResult(
            mip.status, -math.inf, [], 0.0, None, mip, pool, bconfig.method, elapsed,
            master=master,
        )
    provisioning = decode_provisioning(spec, master, mip.incumbent)
    fs_value = first_stage_value(master, mip.incumbent)
    usage = usage_from_values(master, mip.incumbent)
    recourse_values = [oracle.value(usage) for oracle in oracles]
    verified = fs_value + float(np.mean(recourse_values)) if recourse_values else fs_value
    return BendersResult(
        mip.status,
        mip.objective,
        provisioning,
        fs_value,
        verified,
        mip,
        pool,
        bconfig.method,
        elapsed,
        master=master,
        incumbent=mip.incumbent,
    )


def _solve_monolithic(
    spec: FormulationSpec,
    sample: ScenarioSample,
    bconfig: BendersConfig,
    config: SolverConfig,
    backend: SolverBackend,
    t0: float,
    deadline: float,
) -> BendersResult:
    """EXTENSIVE method, or the deterministic degenerate with no scenarios."""
    pool = CutPool(bconfig.tol_cut)
    if len(sample) == 0:
        model = build_first_stage(spec)
    else:
        model = build_extensive(spec)
    if model.num_cols == 0:
        return BendersResult(
            SolveStatus.OPTIMAL, 0.0, [], 0.0, 0.0, None, pool, bconfig.method,
            time.monotonic() - t0,
        )
    mip = backend.solve_mip(model, _remaining_config(config, deadline))
    elapsed = time.monotonic() - t0
    if mip.incumbent is None:
        return BendersResult(
            mip.status, -math.inf, [], 0.0, None, mip, pool, bconfig.method, elapsed,
            master=model,
        )
    provisioning = decode_provisioning(spec, model, mip.incumbent)
    fs_value = first_stage_value(model, mip.incumbent)
    return BendersResult(
        mip.status,
        mip.objective,
        provisioning,
        fs_value,
        mip.objective,
        mip,
        pool,
        bconfig.method,
        elapsed,
        master=model,
        incumbent=mip.incumbent,
    )


def _remaining_config(config: SolverConfig, deadline: float) -> SolverConfig:
    remaining = max(0.1, deadline - time.monotonic())
    return SolverConfig(
        tol_feas=config.tol_feas,
        tol_int=config.tol_int,
        tol_obj=config.tol_obj,
        time_limit_seconds=remaining,
        iteration_limit=config.iteration_limit,
        node_limit=config.node_limit,
    )
