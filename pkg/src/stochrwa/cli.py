"""Command-line entry point.

Subcommands: ``solve``, ``simulate``, ``saa``, ``evss``,
``validate-topology``.  Every run takes a declarative config file, accepts
``--set a.b=value`` overrides, and writes machine-readable results plus the
resolved config into its output directory.  Exit codes: 0 on success /
proven optimal, 2 when a time limit cut the run short, 1 on error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from . import __version__, benders, saa as saa_mod, sim as sim_mod
from .config import ConfigError, ExperimentConfig, parse_config, resolve_topology_path, build_instance
from .solvers import SolveStatus, get_backend
from .topology import TopologyError, load_topology
from .traffic import ScenarioSample, make_rng, sample_scenarios

# Directed-arc counts the bundled networks are validated against.
EXPECTED_COUNTS = {
    "abilene": (12, 30),
    "cost239": (11, 50),
    "nsf": (14, 42),
    "atlanta": (15, 44),
    "usa": (24, 88),
    "brazil": (27, 140),
}

_STREAM_CLI_SCENARIOS = 21


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TopologyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochrwa", description=__doc__)
    parser.add_argument("--version", action="version", version=f"stochrwa {__version__}")
    sub = parser.add_subparsers(required=True)

    def add_config_command(name: str, func, help_text: str):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="path to the experiment config (YAML)")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="override any config key (dotted path)")
        p.add_argument("--out", help="output directory (overrides config output_dir)")
        p.add_argument("--force", action="store_true", help="allow writing into a non-empty output directory")
        p.add_argument("--threads", type=int, default=None, help="parallel workers (1 = serial reference run)")
        p.set_defaults(func=func)
        return p

    add_config_command("solve", cmd_solve, "solve one provisioning/rerouting instance")
    add_config_command("simulate", cmd_simulate, "rolling-horizon policy simulation")
    add_config_command("saa", cmd_saa, "sampling bounds across scenario levels")
    add_config_command("evss", cmd_evss, "expected value of the stochastic solution")

    v = sub.add_parser("validate-topology", help="parse an edge-list file and report its size")
    v.add_argument("topology", help="bundled network name or path to an .edges file")
    v.add_argument("--wavelengths", type=int, default=1)
    v.set_defaults(func=cmd_validate_topology)
    return parser


def _load(args) -> ExperimentConfig:
    with open(args.config, "r", encoding="utf-8") as fh:
        cfg = parse_config(fh, args.overrides)
    if args.out:
        cfg.resolved["output_dir"] = args.out
    if args.threads is not None:
        cfg.resolved["threads"] = args.threads
    return cfg


def _prepare_output(cfg: ExperimentConfig, force: bool) -> Path:
    out = Path(cfg.resolved["output_dir"])
    if out.exists() and any(out.iterdir()) and not force:
        raise ConfigError(f"output directory {out} is not empty (use --force to overwrite)")
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(yaml.safe_dump(cfg.resolved, sort_keys=True))
    (out / "version.txt").write_text(f"stochrwa {__version__}\n")
    return out


def _exit_code(status: SolveStatus) -> int:
    if status is SolveStatus.OPTIMAL:
        return 0
    if status is SolveStatus.TIME_LIMIT:
        return 2
    return 1


def cmd_solve(args) -> int:
    cfg = _load(args)
    out = _prepare_output(cfg, args.force)
    spec, scenario_count = build_instance(cfg, "solve")
    sec = cfg.resolved["solve"]
    sample = (
        sample_scenarios(
            cfg.traffic_params(),
            spec.topology.num_nodes,
            scenario_count,
            make_rng(cfg.resolved["seed"], _STREAM_CLI_SCENARIOS),
            seed=cfg.resolved["seed"],
        )
        if scenario_count
        else ScenarioSample(())
    )
    result = benders.solve(
        spec,
        sample,
        cfg.benders_config("solve"),
        cfg.solver_config(),
        get_backend(sec["engine"]),
    )
    payload = {
        "status": result.status.value,
        "objective": result.objective if result.incumbent is not None or result.mip is None else None,
        "stats": result.stats(),
        "provisioning": [
            {
                "source": lp.source,
                "destination": lp.destination,
                "wavelength": lp.wavelength,
                "path": list(lp.path),
            }
            for lp in result.first_stage
        ],
    }
    (out / "result.json").write_text(json.dumps(payload, indent=2))
    print(json.dumps(result.stats()))
    return _exit_code(result.status)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out = _prepare_output(cfg, args.force)
    policies = cfg.resolved["simulate"]["policies"]
    if not policies or not 1 <= len(policies) <= 2:
        raise ConfigError("simulate.policies must list one or two policies")
    topo = cfg.topology()
    threads = cfg.resolved["threads"]
    runs_dir = out / "runs"
    runs_dir.mkdir(exist_ok=True)
    traces_by_policy = {}
    summary: dict = {"policies": {}}
    for policy in policies:
        sim_cfg = cfg.sim_config(policy)
        traces = sim_mod.run_experiment(topo, sim_cfg, threads=threads)
        traces_by_policy[policy] = traces
        for trace in traces:
            path = runs_dir / f"{policy}_run{trace.run_index:03d}.csv"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                sim_mod.write_trace_csv(trace, fh)
        summary["policies"][policy] = {
            "seed": sim_cfg.seed,
            "mean_cum_granted": sum(t.cum_granted for t in traces) / len(traces),
            "fallbacks": sum(t.fallback_count for t in traces),
        }
    if len(policies) == 2:
        rows = sim_mod.compare(traces_by_policy[policies[0]], traces_by_policy[policies[1]])
        with open(out / "comparison.csv", "w", encoding="utf-8", newline="") as fh:
            sim_mod.write_comparison_csv(rows, fh)
        summary["comparison"] = f"{policies[0]} vs {policies[1]}"
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary))
    return 0


def cmd_saa(args) -> int:
    cfg = _load(args)
    out = _prepare_output(cfg, args.force)
    sec = cfg.resolved["saa"]
    if not sec["levels"]:
        raise ConfigError("saa.levels must list at least one scenario level")
    spec, _ = build_instance(cfg, "saa")
    reports = []
    for level in sec["levels"]:
        report = saa_mod.saa_analysis(
            spec,
            cfg.traffic_params(),
            level,
            sec["repetitions"],
            sec["eval_size"],
            cfg.resolved["seed"],
            cfg.benders_config("saa"),
            cfg.solver_config(),
            get_backend(sec["engine"]),
        )
        reports.append(report)
    _write_csv(out / "saa.csv", [r.row() for r in reports])
    print(json.dumps([r.row() for r in reports]))
    return 0


def cmd_evss(args) -> int:
    cfg = _load(args)
    out = _prepare_output(cfg, args.force)
    sec = cfg.resolved["evss"]
    spec, _ = build_instance(cfg, "evss")
    sample = sample_scenarios(
        cfg.traffic_params(),
        spec.topology.num_nodes,
        sec["scenario_count"],
        make_rng(cfg.resolved["seed"], _STREAM_CLI_SCENARIOS),
        seed=cfg.resolved["seed"],
    )
    report = saa_mod.evss(
        spec, sample, cfg.benders_config("evss"), cfg.solver_config(), get_backend(sec["engine"])
    )
    _write_csv(out / "evss.csv", [report.row()])
    print(json.dumps(report.row()))
    return 0


def cmd_validate_topology(args) -> int:
    path = resolve_topology_path(args.topology)
    with open(path, "r", encoding="utf-8") as fh:
        topo = load_topology(fh, num_wavelengths=args.wavelengths)
    name = Path(args.topology).stem if args.topology not in EXPECTED_COUNTS else args.topology
    line = f"{path}: {topo.num_nodes} nodes, {topo.num_arcs} directed arcs"
    expected = EXPECTED_COUNTS.get(name)
    if expected:
        ok = (topo.num_nodes, topo.num_arcs) == expected
        line += f" (expected {expected[0]}/{expected[1]}: {'ok' if ok else 'MISMATCH'})"
        print(line)
        return 0 if ok else 1
    print(line)
    return 0


def _write_csv(path: Path, rows: list[dict]) -> None:
    import csv

    if not rows:
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


if __name__ == "__main__":
    sys.exit(main())
