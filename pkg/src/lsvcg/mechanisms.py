"""Allocation mechanisms: exact VCG and the shadow-price payment rule.

Two payment rules over the same reporting game (each agent reports a type,
the planner allocates from the solved menu):

* :func:`vcg_exact` charges every agent the externality it imposes, computed
  from one leave-one-out solve per distinct report.  It is the small-scale
  oracle: exact, strategyproof, and expensive.
* :func:`large_scale_vcg` charges shadow prices for the agent's *monitored*
  (true-influence) load, minus an optional per-capita capacity rebate
  ``beta * C_n / I``.  Payments need only the market prices and observed
  loads, never a re-solve.

Capacity conventions.  With an explicit agent list, ``scenario.capacities``
are totals shared by those agents (matching :func:`~lsvcg.solver.solve_agent_list`),
so the two mechanisms are directly comparable on one scenario.  With a report
*distribution* (mean-field mode), capacities are read per capita, the rebate
is ``beta * C_n``, and prices are independent of any single agent's report.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Population, Scenario, ValidationError, empirical_population, utility_value
from .solver import (
    DEFAULT_CONFIG,
    PrimalDualSolution,
    SolverConfig,
    solve_weighted,
)

__all__ = [
    "Report",
    "Outcome",
    "EXACT_VCG_MAX_AGENTS",
    "vcg_exact",
    "large_scale_vcg",
    "budget_audit",
    "ir_audit",
    "shadow_payment_gap",
    "truthful_reports",
    "outcome_rows",
]

#: Scale guard for the exact mechanism; beyond this many agents use
#: :func:`large_scale_vcg`.
EXACT_VCG_MAX_AGENTS = 200


@dataclass(frozen=True)
class Report:
    """A (possibly untruthful) type announcement."""

    theta_report: int
    zeta_report: int

    def flat(self, scenario: Scenario) -> int:
        return scenario.type_space.flat_index(self.theta_report, self.zeta_report)


@dataclass(frozen=True)
class Outcome:
    """Per-agent results of one mechanism run.

    ``payoffs`` are always computed against *true* utility types:
    ``payoffs[i] == utility(true theta_i, allocations[i]) - payments[i]``.
    """

    allocations: np.ndarray  # (I, N)
    payments: np.ndarray  # (I,)
    prices: np.ndarray  # (N,)
    payoffs: np.ndarray  # (I,)
    reports: tuple[Report, ...]
    true_types: tuple[tuple[int, int], ...]
    beta: float
    constraint_slack: np.ndarray  # slack of the solved program
    mean_field: bool = False

    def __post_init__(self):
        for name in ("allocations", "payments", "prices", "payoffs", "constraint_slack"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def truthful_reports(true_types: Sequence[tuple[int, int]]) -> list[Report]:
    return [Report(theta, zeta) for theta, zeta in true_types]


def _check_alignment(reports, true_types, scenario):
    if len(reports) != len(true_types):
        raise ValidationError("reports and true_types must have equal length")
    for r in reports:
        scenario.type_space.flat_index(r.theta_report, r.zeta_report)
    for theta, zeta in true_types:
        scenario.type_space.flat_index(theta, zeta)


def _true_influence(scenario: Scenario, true_types, allocations) -> np.ndarray:
    """Monitored load of each agent at its allocation, using true zeta."""
    out = np.empty_like(allocations)
    for i, (_, zeta) in enumerate(true_types):
        a = scenario.influence.linear[zeta]
        b = scenario.influence.quadratic[zeta]
        out[i] = a * allocations[i] + b * allocations[i] ** 2
    return out


def _report_counts(reports: Sequence[Report], scenario: Scenario) -> np.ndarray:
    counts = np.zeros(scenario.type_space.num_types, dtype=float)
    for r in reports:
        counts[r.flat(scenario)] += 1.0
    return counts


def vcg_exact(
    reports: Sequence[Report],
    true_types: Sequence[tuple[int, int]],
    scenario: Scenario,
    config: SolverConfig = DEFAULT_CONFIG,
) -> Outcome:
    """Exact VCG outcome for an explicit agent list (small-scale oracle).

    The allocation maximizes reported welfare subject to the reported-type
    loads fitting the total capacities.  Agent ``i`` pays the others'
    optimal welfare without it minus their reported welfare at the joint
    optimum.  Identical reports share identical subproblems, so the
    nominally ``I + 1`` solves reduce to one per distinct report plus one.
    """
    _check_alignment(reports, true_types, scenario)
    num_agents = len(reports)
    if num_agents == 0:
        raise ValidationError("at least one agent is required")
    if num_agents > EXACT_VCG_MAX_AGENTS:
        raise ValidationError(
            f"exact VCG is guarded at {EXACT_VCG_MAX_AGENTS} agents; "
            "use large_scale_vcg for bigger populations"
        )

    counts = _report_counts(reports, scenario)
    full = solve_weighted(scenario, counts, scenario.capacities, config)
    w = scenario.type_weights()
    per_type_utility = np.sum(w * np.log1p(full.z), axis=1)
    reported_welfare = float(counts @ per_type_utility)

    payments_by_type: dict[int, float] = {}
    for r_idx in np.flatnonzero(counts > 0):
        others = counts.copy()
        others[r_idx] -= 1.0
        if others.sum() <= 0:
            payments_by_type[int(r_idx)] = 0.0
            continue
        rest = solve_weighted(scenario, others, scenario.capacities, config)
        rest_welfare = float(others @ np.sum(w * np.log1p(rest.z), axis=1))
        others_at_joint = reported_welfare - per_type_utility[r_idx]
        payments_by_type[int(r_idx)] = rest_welfare - others_at_joint

    allocations = np.empty((num_agents, scenario.type_space.num_resources))
    payments = np.empty(num_agents)
    payoffs = np.empty(num_agents)
    for i, (rep, tt) in enumerate(zip(reports, true_types)):
        r_idx = rep.flat(scenario)
        allocations[i] = full.z[r_idx]
        payments[i] = payments_by_type[r_idx]
        payoffs[i] = utility_value(scenario.utility, tt[0], allocations[i]) - payments[i]

    return Outcome(
        allocations=allocations,
        payments=payments,
        prices=full.p,
        payoffs=payoffs,
        reports=tuple(reports),
        true_types=tuple(tuple(t) for t in true_types),
        beta=scenario.beta,
        constraint_slack=full.constraint_slack,
    )


def large_scale_vcg(
    reports: Sequence[Report],
    true_types: Sequence[tuple[int, int]],
    scenario: Scenario,
    config: SolverConfig = DEFAULT_CONFIG,
    report_distribution: Population | np.ndarray | None = None,
    beta: float | None = None,
) -> Outcome:
    """Shadow-price mechanism outcome.

    Finite mode (``report_distribution is None``): the listed agents are the
    whole population; the reported-type program is solved at the scenario's
    total capacities and each agent pays
    ``sum_n p_n * (f_true(z_report) - beta * C_n / I)``.

    Mean-field mode: ``report_distribution`` fixes the reported population
    (and hence prices), capacities are per capita, the rebate is
    ``beta * C_n``, and the listed agents are measure-zero probes whose
    reports cannot move prices.
    """
    _check_alignment(reports, true_types, scenario)
    beta = scenario.beta if beta is None else float(beta)
    if not (0.0 <= beta <= 1.0):
        raise ValidationError(f"beta must lie in [0, 1], got {beta!r}")

    if report_distribution is None:
        num_agents = len(reports)
        if num_agents == 0:
            raise ValidationError("at least one agent is required")
        counts = _report_counts(reports, scenario)
        solution = solve_weighted(scenario, counts, scenario.capacities, config)
        rebate = beta * scenario.capacities / num_agents
        mean_field = False
    else:
        shares = (
            report_distribution.shares
            if isinstance(report_distribution, Population)
            else np.asarray(report_distribution, dtype=float)
        )
        solution = solve_weighted(scenario, shares, scenario.capacities, config)
        rebate = beta * scenario.capacities
        mean_field = True

    report_idx = [r.flat(scenario) for r in reports]
    allocations = solution.z[report_idx] if report_idx else np.zeros((0, scenario.type_space.num_resources))
    loads = _true_influence(scenario, true_types, allocations)
    payments = (loads - rebate[None, :]) @ solution.p
    payoffs = np.array(
        [
            utility_value(scenario.utility, tt[0], allocations[i]) - payments[i]
            for i, tt in enumerate(true_types)
        ]
    )
    return Outcome(
        allocations=allocations,
        payments=payments,
        prices=solution.p,
        payoffs=payoffs,
        reports=tuple(reports),
        true_types=tuple(tuple(t) for t in true_types),
        beta=beta,
        constraint_slack=solution.constraint_slack,
        mean_field=mean_field,
    )


def budget_audit(outcome: Outcome, scenario: Scenario) -> tuple[float, float]:
    """Total collected payments versus the closed-form prediction.

    With every capacity binding the prediction is
    ``sum_n p_n * (1 - beta) * C_n``; with slack it falls back to the
    observed-load form ``sum_n p_n * (sum_i f_i - beta * C_n)``.
    """
    if outcome.mean_field:
        raise ValidationError("budget audit applies to finite outcomes; mean-field rows are measure-zero probes")
    total = float(np.sum(outcome.payments))
    caps = scenario.capacities
    binding = np.all(np.abs(outcome.constraint_slack) <= 1e-7 * np.maximum(caps, 1.0))
    if binding:
        predicted = float(outcome.prices @ ((1.0 - outcome.beta) * caps))
    else:
        loads = _true_influence(scenario, outcome.true_types, outcome.allocations)
        predicted = float(outcome.prices @ (loads.sum(axis=0) - outcome.beta * caps))
    return total, predicted


def ir_audit(outcome: Outcome) -> float:
    """Smallest payoff across agents; participation is rational when >= -1e-9."""
    return float(np.min(outcome.payoffs))


def shadow_payment_gap(
    assignments: Sequence[tuple[int, int]],
    scenario: Scenario,
    config: SolverConfig = DEFAULT_CONFIG,
) -> np.ndarray:
    """Per-agent |exact-VCG payment - shadow-price payment| under truth-telling.

    The shadow payment is ``sum_n lambda_n f_true(x_n)`` at the head-count
    optimum; the gap shrinks as the population grows and is the convergence
    measurement behind the large-scale payment rule.
    """
    reports = truthful_reports(assignments)
    exact = vcg_exact(reports, assignments, scenario, config)
    loads = _true_influence(scenario, tuple(assignments), exact.allocations)
    shadow = loads @ exact.prices
    return np.abs(exact.payments - shadow)


def outcome_rows(outcome: Outcome) -> list[dict]:
    """Flat record per agent for table export."""
    rows = []
    for i, (rep, tt) in enumerate(zip(outcome.reports, outcome.true_types)):
        row = {
            "id": i,
            "true_theta": tt[0],
            "true_zeta": tt[1],
            "report_theta": rep.theta_report,
            "report_zeta": rep.zeta_report,
        }
        for n, value in enumerate(outcome.allocations[i]):
            row[f"z_{n}"] = float(value)
        row["payment"] = float(outcome.payments[i])
        row["payoff"] = float(outcome.payoffs[i])
        rows.append(row)
    return rows
