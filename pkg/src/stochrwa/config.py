"""Experiment configuration: strict YAML schema with dotted-path overrides.

One declarative file drives every subcommand.  Unknown keys are rejected,
defaults are explicit in the schema tables below, and the fully resolved
tree is echoed into the output directory so a run can be reproduced from
its artifacts alone.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, IO

import yaml

from .benders import BendersConfig, Method
from .formulations import FormulationSpec, Problem, Relaxation
from .sim import Policy, SimConfig
from .solvers import SolverConfig
from .topology import Topology, load_topology
from .traffic import DemandMatrix, TrafficParams, make_rng

BUNDLED_NETWORKS = ("abilene", "cost239", "nsf", "atlanta", "usa", "brazil")
DATA_DIR_ENV = "STOCHRWA_DATA_DIR"


class ConfigError(ValueError):
    pass


def _bool(v: Any) -> bool:
    if isinstance(v, bool):
        return v
    raise ConfigError(f"expected true/false, got {v!r}")


def _num(v: Any) -> float:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    raise ConfigError(f"expected a number, got {v!r}")


def _int(v: Any) -> int:
    if isinstance(v, int) and not isinstance(v, bool):
        return v
    raise ConfigError(f"expected an integer, got {v!r}")


def _str(v: Any) -> str:
    if isinstance(v, str):
        return v
    raise ConfigError(f"expected a string, got {v!r}")


def _int_list(v: Any) -> list[int]:
    if isinstance(v, list) and all(isinstance(x, int) and not isinstance(x, bool) for x in v):
        return list(v)
    raise ConfigError(f"expected a list of integers, got {v!r}")


def _str_list(v: Any) -> list[str]:
    if isinstance(v, list) and all(isinstance(x, str) for x in v):
        return list(v)
    raise ConfigError(f"expected a list of strings, got {v!r}")


def _demand_map(v: Any) -> dict[tuple[int, int], int]:
    if not isinstance(v, dict):
        raise ConfigError(f"expected a mapping of 's,d' to count, got {v!r}")
    out: dict[tuple[int, int], int] = {}
    for key, count in v.items():
        try:
            s, d = str(key).split(",")
            out[(int(s), int(d))] = _int(count)
        except (ValueError, TypeError):
            raise ConfigError(f"bad demand entry {key!r}: {count!r}") from None
    return out


# Per-section schema: key -> (converter, default).  None default means optional.
_SCHEMA: dict[str, dict[str, tuple]] = {
    "": {
        "topology": (_str, None),
        "wavelengths": (_int, 1),
        "seed": (_int, 0),
        "output_dir": (_str, "out"),
        "threads": (_int, 1),
    },
    "traffic": {
        "arrival_rate": (_num, None),
        "mean_holding_stages": (_num, None),
        "holding_rate": (_num, None),
    },
    "solver": {
        "tol_feas": (_num, 1e-7),
        "tol_int": (_num, 1e-6),
        "tol_obj": (_num, 1e-6),
        "time_limit_seconds": (_num, 600.0),
        "iteration_limit": (_int, 500_000),
    },
    "solve": {
        "problem": (_str, "SmaxRWA"),
        "relaxation": (_str, "IP-LP"),
        "method": (_str, "BENDERS_xbeta"),
        "engine": (_str, "simplex"),
        "scenario_count": (_int, 0),
        "demand": (_demand_map, None),
        "demand_size": (_int, None),
        "initial_requests": (_int, 0),
        "preprocess_lp_lp": (_bool, True),
        "separate_beta_at_fractional": (_bool, True),
        "tol_cut": (_num, 1e-5),
    },
    "simulate": {
        "policies": (_str_list, None),
        "horizon": (_int, 52),
        "repetitions": (_int, 50),
        "scenario_count": (_int, 0),
        "initial_requests": (_int, 0),
        "method": (_str, "BENDERS_xbeta"),
        "engine": (_str, "highs"),
        "policy_time_limit": (_num, 600.0),
    },
    "saa": {
        "problem": (_str, "SmaxRWA"),
        "levels": (_int_list, None),
        "repetitions": (_int, 5),
        "eval_size": (_int, 200),
        "method": (_str, "BENDERS_xbeta"),
        "engine": (_str, "simplex"),
        "demand": (_demand_map, None),
        "demand_size": (_int, None),
        "initial_requests": (_int, 0),
    },
    "evss": {
        "problem": (_str, "SmaxLR"),
        "scenario_count": (_int, 10),
        "method": (_str, "BENDERS_xbeta"),
        "engine": (_str, "simplex"),
        "demand": (_demand_map, None),
        "demand_size": (_int, None),
        "initial_requests": (_int, 0),
    },
}


@dataclass
class ExperimentConfig:
    """Validated configuration tree plus the raw resolved mapping."""

    resolved: dict[str, Any]

    def section(self, name: str) -> dict[str, Any]:
        return self.resolved.get(name, {}) if name else {
            k: v for k, v in self.resolved.items() if not isinstance(v, dict)
        }

    # -- typed accessors -----------------------------------------------------

    def traffic_params(self) -> TrafficParams:
        t = self.resolved.get("traffic", {})
        rate = t.get("arrival_rate")
        if rate is None:
            raise ConfigError("traffic.arrival_rate is required")
        hold_rate = t.get("holding_rate")
        mean_hold = t.get("mean_holding_stages")
        if (hold_rate is None) == (mean_hold is None):
            raise ConfigError("set exactly one of traffic.holding_rate / traffic.mean_holding_stages")
        return TrafficParams(rate, hold_rate if hold_rate is not None else 1.0 / mean_hold)

    def solver_config(self, time_limit: float | None = None) -> SolverConfig:
        s = self.resolved["solver"]
        return SolverConfig(
            tol_feas=s["tol_feas"],
            tol_int=s["tol_int"],
            tol_obj=s["tol_obj"],
            time_limit_seconds=time_limit if time_limit is not None else s["time_limit_seconds"],
            iteration_limit=s["iteration_limit"],
        )

    def topology(self) -> Topology:
        name = self.resolved.get("topology")
        if not name:
            raise ConfigError("topology is required")
        path = resolve_topology_path(name)
        with open(path, "r", encoding="utf-8") as fh:
            return load_topology(fh, num_wavelengths=self.resolved["wavelengths"])

    def sim_config(self, policy: str) -> SimConfig:
        sim = self.resolved["simulate"]
        return SimConfig(
            policy=Policy(policy),
            horizon=sim["horizon"],
            traffic=self.traffic_params(),
            wavelengths=self.resolved["wavelengths"],
            repetitions=sim["repetitions"],
            scenario_count=sim["scenario_count"],
            initial_requests=sim["initial_requests"],
            seed=self.resolved["seed"],
            method=Method(sim["method"]),
            engine=sim["engine"],
            solver=self.solver_config(),
            policy_time_limit=sim["policy_time_limit"],
        )

    def benders_config(self, section: str) -> BendersConfig:
        sec = self.resolved[section]
        kwargs: dict[str, Any] = {"method": Method(sec["method"])}
        if section == "solve":
            kwargs.update(
                preprocess_lp_lp=sec["preprocess_lp_lp"],
                separate_beta_at_fractional=sec["separate_beta_at_fractional"],
                tol_cut=sec["tol_cut"],
            )
        return BendersConfig(**kwargs)


def resolve_topology_path(name: str) -> Path:
    """Bundled network name, or a path to an edge-list file."""
    candidate = Path(name)
    if candidate.suffix == ".edges" or candidate.exists():
        if not candidate.exists():
            raise ConfigError(f"topology file {name!r} not found")
        return candidate
    if name in BUNDLED_NETWORKS:
        override = os.environ.get(DATA_DIR_ENV)
        if override:
            path = Path(override) / f"{name}.edges"
        else:
            path = Path(__file__).parent / "data" / f"{name}.edges"
        if not path.exists():
            raise ConfigError(f"bundled topology {name!r} missing at {path}")
        return path
    raise ConfigError(
        f"unknown topology {name!r}: not a file and not one of {', '.join(BUNDLED_NETWORKS)}"
    )


def _validate_section(path: str, schema: dict[str, tuple], raw: dict[str, Any]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in raw.items():
        if key not in schema:
            where = path or "top level"
            raise ConfigError(f"unknown key {key!r} in {where}")
        conv, _default = schema[key]
        out[key] = conv(value) if value is not None else None
    for key, (_conv, default) in schema.items():
        out.setdefault(key, default)
    return out


def parse_config(source: str | IO[str], overrides: list[str] | None = None) -> ExperimentConfig:
    """Load, override (``a.b=value``), validate, and fill defaults."""
    raw = yaml.safe_load(source.read() if hasattr(source, "read") else source)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    raw = copy.deepcopy(raw)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form a.b=value")
        dotted, text = item.split("=", 1)
        node = raw
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {dotted!r} crosses a non-mapping")
        node[parts[-1]] = yaml.safe_load(text)

    resolved: dict[str, Any] = {}
    top_raw = {k: v for k, v in raw.items() if k in _SCHEMA[""]}
    sections = {k: v for k, v in raw.items() if k not in _SCHEMA[""]}
    resolved.update(_validate_section("", _SCHEMA[""], top_raw))
    for name, body in sections.items():
        if name not in _SCHEMA:
            raise ConfigError(f"unknown section {name!r}")
        if not isinstance(body, dict):
            raise ConfigError(f"section {name!r} must be a mapping")
        resolved[name] = _validate_section(name, _SCHEMA[name], body)
    for name in _SCHEMA:
        if name and name not in resolved:
            resolved[name] = _validate_section(name, _SCHEMA[name], {})
    return ExperimentConfig(resolved)


def build_instance(
    cfg: ExperimentConfig, section: str
) -> tuple[FormulationSpec, int]:
    """Assemble the FormulationSpec a solve-like section describes.

    Returns the spec (without scenarios) and the scenario count.  The
    network state is empty unless ``initial_requests`` asks for a randomly
    provisioned starting point; rerouting problems take their demand from
    that state, provisioning problems from ``demand``/``demand_size``.
    """
    from .sim import random_initial_state
    from .topology import NetworkState

    sec = cfg.resolved[section]
    problem = Problem(sec["problem"])
    topo = cfg.topology()
    seed = cfg.resolved["seed"]
    state = NetworkState.empty(topo)
    if sec["initial_requests"]:
        state = random_initial_state(
            topo, sec["initial_requests"], cfg.traffic_params(), make_rng(seed, 11)
        )

    new_demand = current_demand = None
    if problem in (Problem.MIN_RWA, Problem.SMAX_LR):
        if not state.connections:
            raise ConfigError(f"{problem.value} needs initial_requests > 0")
        current_demand = DemandMatrix.from_mapping(state.demand_counts())
    else:
        if sec.get("demand") is not None:
            new_demand = DemandMatrix.from_mapping(sec["demand"])
        elif sec.get("demand_size") is not None:
            rng = make_rng(seed, 12)
            counts: dict[tuple[int, int], int] = {}
            for _ in range(sec["demand_size"]):
                s = int(rng.integers(topo.num_nodes))
                d = int(rng.integers(topo.num_nodes - 1))
                if d >= s:
                    d += 1
                counts[(s, d)] = counts.get((s, d), 0) + 1
            new_demand = DemandMatrix.from_mapping(counts)
        else:
            raise ConfigError(f"{problem.value} needs 'demand' or 'demand_size'")

    relaxation = Relaxation(sec["relaxation"]) if "relaxation" in sec else Relaxation.IP_LP
    spec = FormulationSpec(
        problem=problem,
        relaxation=relaxation,
        state=state,
        new_demand=new_demand,
        current_demand=current_demand,
    )
    return spec, sec.get("scenario_count", 0)
