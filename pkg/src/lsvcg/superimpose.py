"""Distributed price-broadcast allocation algorithm with a payment overlay.

The algorithm is the textbook dual-decomposition loop: a coordinator
broadcasts prices, every agent replies with its price-taking demand, and each
price moves by a projected subgradient step on the per-capita excess of the
*monitored* load, with diminishing step sizes.  When every agent obeys its
decision rule (replies as its own type), the loop converges to the same
primal-dual point as the centralized head-count solver.

Payments are superimposed afterwards: they read only the algorithm's outputs
(final prices, final allocations, observed loads), so the loop itself
contains no mechanism code and any allocation algorithm with the same
outputs yields bit-identical payments.  Deviations are modeled as
type-impersonation: a deviating agent replies with some other type's demand
in every round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mechanisms import Outcome, Report
from .model import Scenario, ValidationError, utility_value
from .solver import _response_matrix  # shared closed-form best responses

__all__ = [
    "Action",
    "DecisionRule",
    "AlgorithmConfig",
    "AlgorithmTrace",
    "obedient_actions",
    "default_decision_rule",
    "run_algorithm",
    "superimposed_outcome",
    "obedience_check",
]


@dataclass(frozen=True)
class Action:
    """Reply as this type in every round of the algorithm."""

    impersonated_type: tuple[int, int]


@dataclass(frozen=True)
class DecisionRule:
    """Prescribed behavior per type; obedience means impersonating yourself."""

    prescribed_action: dict[tuple[int, int], Action]


def default_decision_rule(scenario: Scenario) -> DecisionRule:
    ts = scenario.type_space
    return DecisionRule(
        prescribed_action={
            ts.unflatten(r): Action(impersonated_type=ts.unflatten(r)) for r in range(ts.num_types)
        }
    )


def obedient_actions(true_types: Sequence[tuple[int, int]]) -> list[Action]:
    return [Action(impersonated_type=tuple(t)) for t in true_types]


@dataclass(frozen=True)
class AlgorithmConfig:
    """Step schedule gamma_0 / sqrt(k), per-capita excess tolerance, round cap."""

    gamma0: float | None = None  # None: 1 / (max_n population-mean linear coefficient)
    tolerance: float = 1e-6
    max_rounds: int = 100_000

    def __post_init__(self):
        if self.gamma0 is not None and self.gamma0 < 0:
            raise ValidationError("gamma0 must be nonnegative")
        if self.tolerance <= 0:
            raise ValidationError("tolerance must be positive")
        if self.max_rounds < 1:
            raise ValidationError("max_rounds must be positive")


DEFAULT_ALGORITHM_CONFIG = AlgorithmConfig()


@dataclass(frozen=True)
class AlgorithmTrace:
    """Round-by-round prices and aggregate monitored demand, plus final outputs.

    ``round_prices[k]`` is the broadcast at round ``k``;
    ``round_demand[k]`` the per-capita aggregate load it elicited.  Per-agent
    replies are recoverable from the group structure (agents sharing a true
    zeta and an impersonated type behave identically), so they are not stored
    per round.
    """

    round_prices: np.ndarray  # (rounds, N)
    round_demand: np.ndarray  # (rounds, N), per capita
    final_prices: np.ndarray  # (N,)
    final_allocations: np.ndarray  # (I, N)
    final_excess: np.ndarray  # (N,), per capita
    converged: bool
    rounds_used: int

    def __post_init__(self):
        for name in ("round_prices", "round_demand", "final_prices", "final_allocations", "final_excess"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _default_gamma0(scenario: Scenario) -> float:
    mean_linear = scenario.population.shares @ scenario.type_linear()
    return 1.0 / float(np.max(mean_linear))


def run_algorithm(
    actions: Sequence[Action],
    true_types: Sequence[tuple[int, int]],
    scenario: Scenario,
    config: AlgorithmConfig = DEFAULT_ALGORITHM_CONFIG,
) -> AlgorithmTrace:
    """Simulate the synchronous price-broadcast loop for an explicit agent list.

    ``scenario.capacities`` are totals shared by the listed agents.  Each
    round the coordinator observes the true-zeta load of every reply
    (influence is monitored even when the reply impersonates another type)
    and moves each price by ``gamma_k * (aggregate load - capacity) / I``,
    projected at zero.  Stops when the per-capita excess is within tolerance
    on every resource, or at the round cap with ``converged=False``.
    """
    if len(actions) != len(true_types):
        raise ValidationError("actions and true_types must have equal length")
    num_agents = len(actions)
    if num_agents == 0:
        raise ValidationError("at least one agent is required")
    ts = scenario.type_space

    # Group agents by (true zeta, impersonated type): identical behavior.
    group_counts: dict[tuple[int, int], int] = {}
    for action, (theta, zeta) in zip(actions, true_types):
        imp = ts.flat_index(*action.impersonated_type)
        key = (zeta, imp)
        group_counts[key] = group_counts.get(key, 0) + 1
    keys = sorted(group_counts)
    counts = np.array([group_counts[k] for k in keys], dtype=float)
    zeta_rows = np.array([k[0] for k in keys])
    imp_rows = np.array([k[1] for k in keys])
    a = scenario.influence.linear[zeta_rows]  # (G, N)
    b = scenario.influence.quadratic[zeta_rows]

    caps_per_capita = scenario.capacities / num_agents
    gamma0 = _default_gamma0(scenario) if config.gamma0 is None else config.gamma0

    def per_capita_demand(menu: np.ndarray) -> np.ndarray:
        replies = menu[imp_rows]  # (G, N)
        loads = a * replies + b * replies * replies
        return (counts @ loads) / num_agents

    p = np.zeros(ts.num_resources)
    prices_hist = []
    demand_hist = []
    converged = False
    rounds_used = 0
    for k in range(1, config.max_rounds + 1):
        menu = _response_matrix(scenario, p)
        demand = per_capita_demand(menu)
        prices_hist.append(p.copy())
        demand_hist.append(demand)
        rounds_used = k
        excess = demand - caps_per_capita
        if float(np.max(np.abs(np.where(p > 0, excess, np.maximum(excess, 0.0))))) <= config.tolerance:
            converged = True
            break
        p = np.maximum(0.0, p + (gamma0 / math.sqrt(k)) * excess)

    menu = _response_matrix(scenario, p)
    final_allocations = np.empty((num_agents, ts.num_resources))
    for i, action in enumerate(actions):
        final_allocations[i] = menu[ts.flat_index(*action.impersonated_type)]
    return AlgorithmTrace(
        round_prices=np.array(prices_hist),
        round_demand=np.array(demand_hist),
        final_prices=p,
        final_allocations=final_allocations,
        final_excess=per_capita_demand(menu) - caps_per_capita,
        converged=converged,
        rounds_used=rounds_used,
    )


def superimposed_outcome(
    trace: AlgorithmTrace,
    true_types: Sequence[tuple[int, int]],
    scenario: Scenario,
    beta: float | None = None,
) -> Outcome:
    """Charge shadow-price payments computed purely from the trace outputs.

    ``h_i = sum_n lambda_n * (f_true(x_i) - beta * C_n / I)`` with the
    algorithm's own final prices and allocations; nothing is re-solved.
    """
    if not trace.converged:
        raise ValidationError("cannot superimpose payments on an unconverged trace")
    num_agents = trace.final_allocations.shape[0]
    if len(true_types) != num_agents:
        raise ValidationError("true_types must match the trace's agent count")
    beta = scenario.beta if beta is None else float(beta)
    if not (0.0 <= beta <= 1.0):
        raise ValidationError(f"beta must lie in [0, 1], got {beta!r}")

    lam = trace.final_prices
    rebate = beta * scenario.capacities / num_agents
    allocations = trace.final_allocations
    payments = np.empty(num_agents)
    payoffs = np.empty(num_agents)
    for i, (theta, zeta) in enumerate(true_types):
        a = scenario.influence.linear[zeta]
        b = scenario.influence.quadratic[zeta]
        load = a * allocations[i] + b * allocations[i] ** 2
        payments[i] = float(lam @ (load - rebate))
        payoffs[i] = utility_value(scenario.utility, theta, allocations[i]) - payments[i]
    return Outcome(
        allocations=allocations,
        payments=payments,
        prices=lam,
        payoffs=payoffs,
        reports=tuple(Report(theta, zeta) for theta, zeta in true_types),
        true_types=tuple(tuple(t) for t in true_types),
        beta=beta,
        constraint_slack=-trace.final_excess * num_agents,
    )


def obedience_check(
    scenario: Scenario,
    num_agents: int,
    deviator_type: tuple[int, int],
    config: AlgorithmConfig = DEFAULT_ALGORITHM_CONFIG,
) -> tuple[float, float, float]:
    """Payoff of obeying versus the best impersonation, all others obedient.

    Replicates the scenario population to ``num_agents`` agents, runs the
    algorithm once per candidate action of a single ``deviator_type`` agent,
    and returns ``(obedient_payoff, best_deviation_payoff, margin)`` with
    ``margin = obedient - best deviation``.
    """
    ts = scenario.type_space
    counts = scenario.population.shares * num_agents
    if np.any(np.abs(counts - np.round(counts)) > 1e-9):
        raise ValidationError("num_agents times every population share must be integral")
    counts = np.round(counts).astype(int)
    true_types: list[tuple[int, int]] = []
    for r in range(ts.num_types):
        true_types.extend([ts.unflatten(r)] * counts[r])
    deviator = true_types.index(tuple(deviator_type))

    def deviator_payoff(impersonated: tuple[int, int]) -> float:
        acts = obedient_actions(true_types)
        acts[deviator] = Action(impersonated_type=impersonated)
        trace = run_algorithm(acts, true_types, scenario, config)
        outcome = superimposed_outcome(trace, true_types, scenario)
        return float(outcome.payoffs[deviator])

    obedient = deviator_payoff(tuple(deviator_type))
    best_dev = -math.inf
    for r in range(ts.num_types):
        candidate = ts.unflatten(r)
        if candidate == tuple(deviator_type):
            continue
        best_dev = max(best_dev, deviator_payoff(candidate))
    if best_dev == -math.inf:  # no alternative action exists
        return obedient, obedient, 0.0
    return obedient, best_dev, obedient - best_dev
