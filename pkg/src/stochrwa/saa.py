"""Sampling-based bounds for the two-stage problems.

Upper bound: the mean of independent sampled-problem optima (biased above
the true optimum for a maximization).  Lower bound: evaluate each sampled
problem's first-stage solution on a fresh, much larger evaluation sample
and keep the best mean.  Confidence intervals use the t-distribution at
95%; the reported gap is the worst case over the interval endpoints.

Also computes the expected value of the stochastic solution: the stochastic
optimum minus the average in-sample performance of the single-scenario
(deterministic) solutions.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import benders
from .benders import BendersConfig, RecourseOracle
from .formulations import FormulationSpec, Relaxation, usage_from_values
from .solvers import SolveStatus, SolverBackend, SolverConfig, SolverError, get_backend
from .traffic import ScenarioSample, TrafficParams, make_rng, sample_scenarios

_CONFIDENCE = 0.95

# entropy-stream tags so every RNG in an analysis is distinct and replayable
_STREAM_SAA_REP = 101
_STREAM_EVAL = 202


@dataclass(frozen=True)
class SaaReport:
    scenario_level: int
    repetitions: int
    ub_mean: float
    ub_width: float
    lb_mean: float
    lb_width: float
    gap_pct: float
    excluded: tuple[int, ...] = ()
    ub_values: tuple[float, ...] = ()
    best_repetition: int = 0

    def row(self) -> dict:
        return {
            "level": self.scenario_level,
            "repetitions": self.repetitions,
            "ub_mean": round(self.ub_mean, 4),
            "ub_width": round(self.ub_width, 4),
            "lb_mean": round(self.lb_mean, 4),
            "lb_width": round(self.lb_width, 4),
            "gap_pct": round(self.gap_pct, 4),
            "excluded": len(self.excluded),
        }


@dataclass(frozen=True)
class EvssReport:
    evss: float
    sigma_det: float
    stochastic_objective: float
    deterministic_means: tuple[float, ...] = ()

    def row(self) -> dict:
        return {
            "evss": round(self.evss, 4),
            "sigma_det": round(self.sigma_det, 4),
            "objective": round(self.stochastic_objective, 4),
        }


def _ci_halfwidth(values: np.ndarray) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    t = stats.t.ppf(0.5 + _CONFIDENCE / 2.0, n - 1)
    return float(t * np.std(values, ddof=1) / math.sqrt(n))


def with_scenarios(spec: FormulationSpec, sample: ScenarioSample) -> FormulationSpec:
    return dataclasses.replace(spec, scenarios=sample)


def evaluate_first_stage(
    spec: FormulationSpec,
    fs_objective: float,
    usage: dict[tuple[int, int], float],
    eval_sample: ScenarioSample,
    backend: SolverBackend,
    config: SolverConfig,
    *,
    exact_recourse: bool = False,
) -> np.ndarray:
    """Per-scenario objective of a fixed first stage on an evaluation sample."""
    values = np.empty(len(eval_sample))
    for k, matrix in enumerate(eval_sample.scenarios):
        if exact_recourse:
            values[k] = fs_objective + _exact_recourse_value(spec, usage, matrix, backend, config)
        else:
            oracle = RecourseOracle(spec, matrix, k, backend, config)
            values[k] = fs_objective + oracle.value(usage)
    return values


def _exact_recourse_value(spec, usage, matrix, backend, config) -> float:
    from .formulations import build_recourse

    model = build_recourse(spec, usage, matrix, integer=True)
    if model.num_cols == 0:
        return 0.0
    mip = backend.solve_mip(model, config)
    if mip.status is not SolveStatus.OPTIMAL:
        raise SolverError(f"exact recourse evaluation ended {mip.status.value}")
    return mip.objective


def saa_analysis(
    spec: FormulationSpec,
    traffic: TrafficParams,
    level: int,
    repetitions: int,
    eval_size: int,
    seed: int,
    bconfig: BendersConfig | None = None,
    config: SolverConfig | None = None,
    backend: SolverBackend | str = "simplex",
    *,
    exact_recourse: bool = False,
) -> SaaReport:
    """Solve ``repetitions`` independent sampled problems at one sample size.

    Repetitions whose solve hits the time limit are excluded from the bound
    statistics and reported; at least two must survive.
    """
    if repetitions < 2:
        raise ValueError("need at least two repetitions")
    if isinstance(backend, str):
        backend = get_backend(backend)
    bconfig = bconfig or BendersConfig()
    config = config or SolverConfig()
    num_nodes = spec.topology.num_nodes

    ub_values: list[float] = []
    solutions: list[tuple[int, float, dict]] = []  # (rep, fs value, usage)
    excluded: list[int] = []
    for rep in range(repetitions):
        rng = make_rng(seed, _STREAM_SAA_REP, rep)
        sample = sample_scenarios(traffic, num_nodes, level, rng)
        rep_spec = with_scenarios(spec, sample)
        result = benders.solve(rep_spec, sample, bconfig, config, backend)
        if result.status is not SolveStatus.OPTIMAL or result.incumbent is None:
            excluded.append(rep)
            continue
        ub_values.append(result.objective)
        usage = usage_from_values(result.master, result.incumbent)
        solutions.append((rep, result.first_stage_objective, usage))
    if len(ub_values) < 2:
        raise SolverError(f"only {len(ub_values)} repetitions solved; cannot form bounds")

    eval_sample = sample_scenarios(
        traffic, num_nodes, eval_size, make_rng(seed, _STREAM_EVAL)
    )
    best: tuple[float, float, int] | None = None  # (mean, width, rep)
    for rep, fs_value, usage in solutions:
        per_scenario = evaluate_first_stage(
            spec, fs_value, usage, eval_sample, backend, config, exact_recourse=exact_recourse
        )
        mean = float(np.mean(per_scenario))
        if best is None or mean > best[0]:
            best = (mean, _ci_halfwidth(per_scenario), rep)

    ub = np.array(ub_values)
    ub_mean, ub_width = float(np.mean(ub)), _ci_halfwidth(ub)
    lb_mean, lb_width, best_rep = best
    lb_low = lb_mean - lb_width
    gap_pct = 100.0 * (ub_mean + ub_width - lb_low) / max(1e-9, abs(lb_low))
    return SaaReport(
        scenario_level=level,
        repetitions=repetitions,
        ub_mean=ub_mean,
        ub_width=ub_width,
        lb_mean=lb_mean,
        lb_width=lb_width,
        gap_pct=gap_pct,
        excluded=tuple(excluded),
        ub_values=tuple(ub_values),
        best_repetition=best_rep,
    )


def evss(
    spec: FormulationSpec,
    sample: ScenarioSample,
    bconfig: BendersConfig | None = None,
    config: SolverConfig | None = None,
    backend: SolverBackend | str = "simplex",
) -> EvssReport:
    """Stochastic optimum minus the average of single-scenario solutions.

    Each scenario's deterministic problem (the two-stage model with that one
    scenario) is solved; its first stage is then evaluated in-sample across
    the whole sample.  Nonnegative up to solver tolerance, and zero when all
    scenarios coincide.
    """
    if len(sample) < 2:
        raise ValueError("EVSS needs at least two scenarios")
    if isinstance(backend, str):
        backend = get_backend(backend)
    bconfig = bconfig or BendersConfig()
    config = config or SolverConfig()

    stoch = benders.solve(with_scenarios(spec, sample), sample, bconfig, config, backend)
    if stoch.status is not SolveStatus.OPTIMAL or stoch.incumbent is None:
        raise SolverError(f"stochastic solve ended {stoch.status.value}")

    oracles = [
        RecourseOracle(spec, matrix, k, backend, config)
        for k, matrix in enumerate(sample.scenarios)
    ]
    means: list[float] = []
    for i, matrix in enumerate(sample.scenarios):
        single = ScenarioSample((matrix,), sample.seed)
        det = benders.solve(with_scenarios(spec, single), single, bconfig, config, backend)
        if det.status is not SolveStatus.OPTIMAL or det.incumbent is None:
            raise SolverError(f"deterministic solve for scenario {i} ended {det.status.value}")
        usage = usage_from_values(det.master, det.incumbent)
        recourse = [oracle.value(usage) for oracle in oracles]
        means.append(det.first_stage_objective + float(np.mean(recourse)))

    value = stoch.objective - float(np.mean(means))
    sigma = float(np.std(means, ddof=1))
    return EvssReport(
        evss=value,
        sigma_det=sigma,
        stochastic_objective=stoch.objective,
        deterministic_means=tuple(means),
    )
