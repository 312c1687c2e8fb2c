"""Batch experiment runner.

One subcommand per module operation family, all driven by a scenario
document, a seed, and an output directory.  Every output table is
comma-separated UTF-8 with LF line endings, begins with a ``#``-prefixed
metadata comment block and a header row, and is byte-identical across reruns
of the same manifest; a ``meta.json`` record accompanies every run.  Wall
time is reported on standard error only, so it never perturbs the outputs.

Exit codes: 0 success, 2 validation problems (bad documents, bad flags),
3 solver failures.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .dynamic import dynamic_incentive_gap, dynamic_mechanism_step, load_dynamic_scenario, plan_policy, MeanFieldState
from .incentives import loglog_slope, verify_incentive_bound
from .mechanisms import budget_audit, large_scale_vcg, outcome_rows, truthful_reports, vcg_exact
from .model import ValidationError, load_scenario
from .solver import SolverError, DEFAULT_CONFIG, price_sensitivity, sensitivity_norm_bound_check, solve_population
from .superimpose import obedient_actions, run_algorithm, superimposed_outcome
from .generate import replicate_assignments

__all__ = ["RunManifest", "main"]


@dataclass(frozen=True)
class RunManifest:
    subcommand: str
    scenario_path: str
    seed: int
    output_dir: str
    overrides: dict = field(default_factory=dict)


def _format(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_table(path: Path, rows: list[dict], manifest: RunManifest) -> None:
    lines = [
        f"# subcommand: {manifest.subcommand}",
        f"# scenario: {manifest.scenario_path}",
        f"# seed: {manifest.seed}",
        f"# version: {__version__}",
    ]
    for key in sorted(manifest.overrides):
        lines.append(f"# override {key}: {_format(manifest.overrides[key])}")
    if rows:
        header = list(rows[0].keys())
        lines.append(",".join(header))
        for row in rows:
            lines.append(",".join(_format(row[k]) for k in header))
    path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def _write_meta(out: Path, manifest: RunManifest, extra: dict | None = None) -> None:
    record = {
        "subcommand": manifest.subcommand,
        "scenario": manifest.scenario_path,
        "seed": manifest.seed,
        "version": __version__,
        "overrides": {k: manifest.overrides[k] for k in sorted(manifest.overrides)},
        "solver": {
            "price_tolerance": DEFAULT_CONFIG.price_tolerance,
            "stationarity_tolerance": DEFAULT_CONFIG.stationarity_tolerance,
            "max_bisection_iters": DEFAULT_CONFIG.max_bisection_iters,
        },
    }
    if extra:
        record.update(extra)
    (out / "meta.json").write_bytes(json.dumps(record, indent=2, sort_keys=True).encode("utf-8"))


def _load_static(args):
    scenario = load_scenario(Path(args.scenario).read_bytes())
    if args.beta is not None:
        scenario = replace(scenario, beta=args.beta)
    return scenario


def _finite_assignments(scenario):
    if not scenario.population.is_finite:
        raise ValidationError("this subcommand needs a finite population (num_agents is 'infinite')")
    return replicate_assignments(scenario.population.shares, scenario.population.num_agents, scenario.type_space)


def _solve_for_population(scenario):
    """Finite populations share the capacities as totals; infinite ones read
    them per capita.  Keeps every subcommand consistent on one document."""
    from .solver import solve_weighted

    pop = scenario.population
    if pop.is_finite:
        return solve_weighted(scenario, pop.shares, scenario.capacities / pop.num_agents)
    return solve_population(scenario)


def _type_rows_solution(scenario, solution):
    rows = []
    ts = scenario.type_space
    for r in range(ts.num_types):
        theta, zeta = ts.unflatten(r)
        row = {"theta": theta, "zeta": zeta, "share": float(solution.weights[r])}
        for n in range(ts.num_resources):
            row[f"z_{n}"] = float(solution.z[r, n])
        for n in range(ts.num_resources):
            row[f"p_{n}"] = float(solution.p[n])
        row["kkt_residual"] = float(solution.kkt_residual)
        rows.append(row)
    return rows


def cmd_solve(args, manifest: RunManifest, out: Path) -> None:
    scenario = _load_static(args)
    solution = _solve_for_population(scenario)
    _write_table(out / "solution.csv", _type_rows_solution(scenario, solution), manifest)
    _write_meta(out, manifest, {"iterations": solution.iterations, "kkt_residual": solution.kkt_residual})


def cmd_vcg(args, manifest: RunManifest, out: Path) -> None:
    scenario = _load_static(args)
    assignments = _finite_assignments(scenario)
    outcome = vcg_exact(truthful_reports(assignments), assignments, scenario)
    _write_table(out / "outcome.csv", outcome_rows(outcome), manifest)
    _write_meta(out, manifest, {"num_agents": len(assignments)})


def cmd_lsvcg(args, manifest: RunManifest, out: Path) -> None:
    scenario = _load_static(args)
    if scenario.population.is_finite:
        assignments = _finite_assignments(scenario)
        outcome = large_scale_vcg(truthful_reports(assignments), assignments, scenario)
        total, predicted = budget_audit(outcome, scenario)
        budget = [{"total_payments": total, "predicted": predicted, "beta": outcome.beta}]
    else:
        ts = scenario.type_space
        probes = [ts.unflatten(r) for r in range(ts.num_types)]
        outcome = large_scale_vcg(
            truthful_reports(probes), probes, scenario, report_distribution=scenario.population
        )
        per_capita = float(scenario.population.shares @ outcome.payments)
        budget = [{"total_payments": per_capita, "predicted": float(
            outcome.prices @ ((1.0 - outcome.beta) * scenario.capacities)
        ), "beta": outcome.beta}]
    _write_table(out / "outcome.csv", outcome_rows(outcome), manifest)
    _write_table(out / "budget.csv", budget, manifest)
    _write_meta(out, manifest, {"beta": outcome.beta})


def _parse_i_list(raw: str) -> list[int]:
    try:
        values = [int(part) for part in raw.split(",") if part.strip()]
    except ValueError as exc:
        raise ValidationError(f"--i-list must be a comma-separated list of integers: {exc}") from exc
    if not values:
        raise ValidationError("--i-list must contain at least one head count")
    return values


def cmd_incentive_sweep(args, manifest: RunManifest, out: Path) -> None:
    scenario = _load_static(args)
    i_list = _parse_i_list(args.i_list)
    rho = scenario.population
    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        reports = list(pool.map(lambda n: verify_incentive_bound(scenario, rho, [n]), i_list))
    rows = []
    all_rows = [r.rows[0] for r in reports]
    slope = loglog_slope([r[0] for r in all_rows], [r[1] for r in all_rows])
    for sweep in reports:
        report = sweep.reports[0]
        for true_type, gap in sorted(report.per_type_gap.items()):
            best = report.best_misreport[true_type]
            rows.append(
                {
                    "I": report.num_agents,
                    "theta": true_type[0],
                    "zeta": true_type[1],
                    "best_misreport_theta": best[0] if best else "",
                    "best_misreport_zeta": best[1] if best else "",
                    "gap": gap,
                    "bound": report.epsilon_bound,
                    "holds": gap <= report.epsilon_bound * (1 + 1e-6),
                    "slope": slope,
                }
            )
    _write_table(out / "sweep.csv", rows, manifest)
    _write_meta(out, manifest, {"i_list": i_list, "slope": slope})


def cmd_sensitivity(args, manifest: RunManifest, out: Path) -> None:
    scenario = _load_static(args)
    solution = _solve_for_population(scenario)
    sens = price_sensitivity(scenario, scenario.population, solution)
    ts = scenario.type_space
    rows = []
    for n in range(ts.num_resources):
        row = {"resource": n}
        for r in range(ts.num_types):
            theta, zeta = ts.unflatten(r)
            row[f"dp_drho_{theta}_{zeta}"] = float(sens.dp_drho[n, r])
        rows.append(row)
    _write_table(out / "sensitivity.csv", rows, manifest)
    if scenario.population.is_finite:
        lhs, rhs, holds = sensitivity_norm_bound_check(scenario, scenario.population, solution)
        _write_table(out / "bound.csv", [{"lhs": lhs, "rhs": rhs, "holds": holds}], manifest)
        _write_meta(out, manifest, {"bound_holds": bool(holds)})
    else:
        _write_meta(out, manifest, {"bound_holds": None})


def cmd_superimpose(args, manifest: RunManifest, out: Path) -> None:
    scenario = _load_static(args)
    assignments = _finite_assignments(scenario)
    trace = run_algorithm(obedient_actions(assignments), assignments, scenario)
    rows = []
    for k in range(trace.rounds_used):
        row = {"round": k + 1}
        for n in range(scenario.type_space.num_resources):
            row[f"p_{n}"] = float(trace.round_prices[k, n])
        for n in range(scenario.type_space.num_resources):
            row[f"demand_{n}"] = float(trace.round_demand[k, n])
        rows.append(row)
    _write_table(out / "trace.csv", rows, manifest)
    if trace.converged:
        outcome = superimposed_outcome(trace, assignments, scenario)
        _write_table(out / "outcome.csv", outcome_rows(outcome), manifest)
    _write_meta(out, manifest, {"converged": bool(trace.converged), "rounds": trace.rounds_used})


def cmd_dynamic(args, manifest: RunManifest, out: Path) -> None:
    dyn = load_dynamic_scenario(Path(args.scenario).read_bytes())
    mode = "lookahead-oracle" if args.mode == "oracle" else "myopic"
    policy = plan_policy(dyn, mode=mode)
    num_agents = dyn.static.population.num_agents if dyn.static.population.is_finite else None
    gap_rows = dynamic_incentive_gap(dyn, policy, num_agents)
    rows = []
    for t in range(dyn.horizon):
        state = MeanFieldState(rho=policy.rho_path[t], t=t)
        slot = dynamic_mechanism_step(policy.rho_path[t], dyn, policy, state)
        row = {"t": t}
        for theta in range(dyn.num_types):
            row[f"rho_{theta}"] = float(policy.rho_path[t, theta])
        for theta in range(dyn.num_types):
            row[f"z_{theta}"] = float(slot.z[theta, 0])
        row["p_0"] = float(slot.p[0])
        for theta in range(dyn.num_types):
            row[f"payment_{theta}"] = float(slot.payments[theta])
        row["max_gap"] = gap_rows[t].max_gap
        row["bound"] = gap_rows[t].bound
        rows.append(row)
    _write_table(out / "slots.csv", rows, manifest)
    _write_meta(out, manifest, {"mode": mode, "welfare": policy.welfare, "horizon": dyn.horizon})


_COMMANDS = {
    "solve": cmd_solve,
    "vcg": cmd_vcg,
    "lsvcg": cmd_lsvcg,
    "incentive-sweep": cmd_incentive_sweep,
    "sensitivity": cmd_sensitivity,
    "superimpose": cmd_superimpose,
    "dynamic": cmd_dynamic,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lsvcg", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True, help="path to a scenario document")
        p.add_argument("--seed", type=int, default=0, help="root seed recorded in every output")
        p.add_argument("--out", required=True, help="output directory (created if missing)")
        p.add_argument("--beta", type=float, default=None, help="override the scenario's rebate share")
        p.add_argument(
            "--i-list",
            default="10,20,40,80,160,320,640,1280",
            help="comma-separated head counts for sweep subcommands",
        )
        p.add_argument("--mode", choices=["myopic", "oracle"], default="myopic")
        p.add_argument("--workers", type=int, default=None, help="worker pool size for sweeps")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        subcommand=args.subcommand,
        scenario_path=args.scenario,
        seed=args.seed,
        output_dir=str(out),
        overrides={} if args.beta is None else {"beta": args.beta},
    )
    started = time.perf_counter()
    try:
        _COMMANDS[args.subcommand](args, manifest, out)
    except FileNotFoundError as exc:
        print(f"lsvcg: scenario not found: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"lsvcg: validation error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"lsvcg: solver error: {exc}", file=sys.stderr)
        return 3
    print(f"lsvcg: {args.subcommand} finished in {time.perf_counter() - started:.2f}s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
