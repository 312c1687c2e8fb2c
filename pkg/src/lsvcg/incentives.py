"""Finite-population incentives to misreport under the shadow-price mechanism.

The measurement replicates a base population to ``I`` agents while keeping
per-capita capacities fixed, so the market a single agent faces is the same
at every ``I`` and the only finite-population effect is the exact ``1/I``
shift of the reported shares when one agent deviates.  For each true type the
deviation gain against truthful opponents is recorded (floored at zero), and
compared with the closed-form quadratic ceiling

    bound(I) = (2 / I^2) * |Z| * sum_theta L_theta * sum_n C_n^2
               / (L_f^2 * min_r rho_r^4).

Note on observed rates: deviations that understate an agent's influence
depress prices by Theta(1/I) and yield a first-order windfall on the agent's
true consumption, so the measured best gain decays like 1/I on scenarios
where such deviations exist, while the ceiling decays like 1/I^2 with a much
larger constant.  See the incentive-rate experiment script.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Population, Scenario, ValidationError, utility_value
from .solver import DEFAULT_CONFIG, SolverConfig, solve_weighted

__all__ = [
    "IncentiveReport",
    "IncentiveSweep",
    "incentive_gap",
    "misreport_gain_bound",
    "verify_incentive_bound",
    "loglog_slope",
]


@dataclass(frozen=True)
class IncentiveReport:
    """Best misreport gains per true type at one population size."""

    per_type_gap: dict[tuple[int, int], float]
    best_misreport: dict[tuple[int, int], tuple[int, int] | None]
    max_gap: float
    epsilon_bound: float
    num_agents: int | None  # None for the frozen-price (mean-field) regime


@dataclass(frozen=True)
class IncentiveSweep:
    """Rows of (I, max_gap, bound, holds) plus the fitted log-log slope."""

    rows: list[tuple[int, float, float, bool]]
    reports: list[IncentiveReport]
    slope: float


def misreport_gain_bound(scenario: Scenario, rho: Population, num_agents: int) -> float:
    """Closed-form ceiling on any single agent's gain from misreporting."""
    if num_agents < 1:
        raise ValidationError("the gain bound needs a positive head count")
    shares = rho.shares
    if np.any(shares <= 0):
        raise ValidationError("the gain bound requires every type share to be positive")
    l_theta_sum = float(np.sum(np.max(scenario.utility.weights, axis=1)))
    l_f = scenario.influence.derivative_lower_bound
    caps_sq = float(np.sum(scenario.capacities**2))
    min_rho = float(np.min(shares))
    return (2.0 / num_agents**2) * scenario.type_space.num_zeta * l_theta_sum * caps_sq / (
        l_f**2 * min_rho**4
    )


def _payoff(scenario: Scenario, weights, true_type, report_idx, beta, config) -> float:
    """One agent's payoff when the reported population is ``weights``.

    Prices come from the per-capita program at the scenario capacities; the
    agent consumes the menu row of its report, pays shadow prices on its
    monitored (true-zeta) load, and receives the per-capita rebate
    ``beta * C_n``.
    """
    solution = solve_weighted(scenario, weights, scenario.capacities, config)
    z = solution.z[report_idx]
    theta, zeta = true_type
    a = scenario.influence.linear[zeta]
    b = scenario.influence.quadratic[zeta]
    load = a * z + b * z * z
    payment = float(solution.p @ (load - beta * scenario.capacities))
    return utility_value(scenario.utility, theta, z) - payment


def incentive_gap(
    scenario: Scenario,
    base_rho: Population,
    num_agents: int | None,
    config: SolverConfig = DEFAULT_CONFIG,
    opponent_counts: np.ndarray | None = None,
) -> IncentiveReport:
    """Best deviation gain per true type against otherwise-truthful reports.

    ``num_agents=None`` freezes prices at ``base_rho`` (the infinite-population
    regime, where a lone deviation cannot move the reported shares).  With a
    finite ``num_agents`` the deviator's report moves the reported counts by
    exactly one agent and the program is re-solved, so the full price impact
    of the deviation is included.  ``opponent_counts`` optionally fixes the
    other agents' reports (integer counts summing to ``num_agents - 1``);
    by default opponents report truthfully.
    """
    ts = scenario.type_space
    num_types = ts.num_types
    beta = scenario.beta

    if num_agents is None:
        frozen = solve_weighted(scenario, base_rho.shares, scenario.capacities, config)
        menu = frozen.z

        def payoff(true_type, report_idx, _truth_idx):
            theta, zeta = true_type
            z = menu[report_idx]
            a = scenario.influence.linear[zeta]
            b = scenario.influence.quadratic[zeta]
            load = a * z + b * z * z
            return utility_value(scenario.utility, theta, z) - float(
                frozen.p @ (load - beta * scenario.capacities)
            )

        bound = 0.0
    else:
        counts = base_rho.shares * num_agents
        if np.any(np.abs(counts - np.round(counts)) > 1e-9):
            raise ValidationError("num_agents times every base share must be integral (replicated population)")
        counts = np.round(counts).astype(int)
        if opponent_counts is not None:
            opponent_counts = np.asarray(opponent_counts)
            if opponent_counts.shape != (num_types,) or np.any(opponent_counts < 0):
                raise ValidationError("opponent_counts must be nonnegative, one per flattened type")
            if int(opponent_counts.sum()) != num_agents - 1:
                raise ValidationError("opponent_counts must sum to num_agents - 1")

        def payoff(true_type, report_idx, truth_idx):
            if opponent_counts is None:
                dev = counts.copy()
                dev[truth_idx] -= 1
                dev[report_idx] += 1
            else:
                dev = opponent_counts.copy()
                dev[report_idx] += 1
            return _payoff(scenario, dev / num_agents, true_type, report_idx, beta, config)

        bound = misreport_gain_bound(scenario, base_rho, num_agents)

    per_type_gap: dict[tuple[int, int], float] = {}
    best_misreport: dict[tuple[int, int], tuple[int, int] | None] = {}
    for r in range(num_types):
        true_type = ts.unflatten(r)
        truthful = payoff(true_type, r, r)
        best_gain = -math.inf
        best = None
        for r_alt in range(num_types):
            if r_alt == r:
                continue
            gain = payoff(true_type, r_alt, r) - truthful
            if gain > best_gain:
                best_gain, best = gain, ts.unflatten(r_alt)
        if best is None:  # single-type space: no alternative report exists
            per_type_gap[true_type] = 0.0
            best_misreport[true_type] = None
        else:
            per_type_gap[true_type] = max(0.0, best_gain)
            best_misreport[true_type] = best

    return IncentiveReport(
        per_type_gap=per_type_gap,
        best_misreport=best_misreport,
        max_gap=max(per_type_gap.values()),
        epsilon_bound=bound,
        num_agents=num_agents,
    )


def loglog_slope(x, y) -> float:
    """OLS slope of log(y) on log(x) over strictly positive points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0)
    if np.count_nonzero(keep) < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


def verify_incentive_bound(
    scenario: Scenario,
    rho: Population,
    i_list,
    config: SolverConfig = DEFAULT_CONFIG,
) -> IncentiveSweep:
    """Measure gaps across a replication sweep and compare with the ceiling."""
    rows = []
    reports = []
    for num_agents in i_list:
        report = incentive_gap(scenario, rho, int(num_agents), config)
        holds = report.max_gap <= report.epsilon_bound * (1.0 + 1e-6)
        rows.append((int(num_agents), report.max_gap, report.epsilon_bound, holds))
        reports.append(report)
    slope = loglog_slope([r[0] for r in rows], [r[1] for r in rows])
    return IncentiveSweep(rows=rows, reports=reports, slope=slope)
