"""Dynamic allocation with Markov types and a deterministic mean-field flow.

Agents carry a single utility type ``theta`` (the influence dimension is
dropped; loads are the allocations themselves), evolving between slots by a
transition kernel conditioned on the current type and a *bin* of the received
allocation.  In the infinite-population regime agent chains are independent,
so the population distribution ``rho_t`` follows the deterministic flow

    rho_{t+1}(theta') = sum_theta rho_t(theta) * Q(theta' | theta, bin(z_theta)).

A planner policy fixes per-slot per-type allocations; the discounted value of
holding a type under that policy backs up through a finite horizon chosen so
the tail weight ``delta^H`` is below a truncation tolerance.  The per-slot
mechanism prices capacity against reported shares, using instantaneous
utility plus the frozen policy continuation as each type's objective, and
charges ``p_t . z_t`` (optionally minus a per-capita capacity rebate).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .model import Scenario, ValidationError, scenario_from_dict, scenario_to_dict
from .solver import DEFAULT_CONFIG, SolverConfig, SolverError, solve_weighted

__all__ = [
    "TransitionKernel",
    "DynamicScenario",
    "MeanFieldState",
    "Policy",
    "SlotOutcome",
    "DynamicIncentiveRow",
    "mean_field_step",
    "mean_field_step_monte_carlo",
    "plan_policy",
    "plan_welfare",
    "value_u_sigma",
    "dynamic_mechanism_step",
    "dynamic_incentive_gap",
    "load_dynamic_scenario",
    "save_dynamic_scenario",
]


@dataclass(frozen=True)
class TransitionKernel:
    """Row-stochastic type transitions conditioned on an allocation bin.

    ``probabilities[theta_next, theta_now, k]`` with bins delimited by
    ``bin_edges`` (length ``num_bins + 1``, increasing); allocations are
    binned on their first resource and must fall inside the covered range.
    A single bin makes the kernel allocation-independent.
    """

    probabilities: np.ndarray  # (T, T, B)
    bin_edges: np.ndarray  # (B + 1,)

    def __post_init__(self):
        q = np.array(self.probabilities, dtype=float)
        edges = np.array(self.bin_edges, dtype=float)
        if q.ndim != 3 or q.shape[0] != q.shape[1]:
            raise ValidationError("kernel.probabilities must have shape (T, T, num_bins)")
        if edges.ndim != 1 or edges.size != q.shape[2] + 1 or np.any(np.diff(edges) <= 0):
            raise ValidationError("kernel.bin_edges must be increasing with num_bins + 1 entries")
        if np.any(q < 0) or np.any(q > 1):
            raise ValidationError("kernel.probabilities must lie in [0, 1]")
        col_sums = q.sum(axis=0)
        if np.any(np.abs(col_sums - 1.0) > 1e-12):
            raise ValidationError("kernel.probabilities must sum to 1 over theta_next for every (theta, bin)")
        q.setflags(write=False)
        edges.setflags(write=False)
        object.__setattr__(self, "probabilities", q)
        object.__setattr__(self, "bin_edges", edges)

    @property
    def num_types(self) -> int:
        return self.probabilities.shape[0]

    @property
    def num_bins(self) -> int:
        return self.probabilities.shape[2]

    @property
    def allocation_independent(self) -> bool:
        return self.num_bins == 1

    def bin_of(self, z) -> np.ndarray:
        """Bin index of each allocation (scalar per type, first resource)."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if z.ndim > 1:
            z = z[..., 0]
        edges = self.bin_edges
        tol = 1e-12 * max(1.0, abs(float(edges[-1])))
        if np.any(z < edges[0] - tol) or np.any(z > edges[-1] + tol):
            raise ValidationError(
                f"allocation outside the kernel's bin range [{edges[0]}, {edges[-1]}]"
            )
        idx = np.searchsorted(edges, z, side="right") - 1
        return np.clip(idx, 0, self.num_bins - 1)


@dataclass(frozen=True)
class MeanFieldState:
    """Type distribution at one slot."""

    rho: np.ndarray  # (T,)
    t: int

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        if rho.ndim != 1 or np.any(rho < -1e-15) or abs(float(rho.sum()) - 1.0) > 1e-12:
            raise ValidationError("state distribution must be a simplex vector")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        if self.t < 0:
            raise ValidationError("slot index must be nonnegative")


@dataclass(frozen=True)
class DynamicScenario:
    """Markov-type problem: static core (single zeta, identity influence),
    kernel, discount, truncation horizon, and initial distribution."""

    static: Scenario
    kernel: TransitionKernel
    discount: float
    horizon: int
    rho0: np.ndarray  # (T,)
    truncation_tol: float = 1e-6

    def __post_init__(self):
        s = self.static
        if s.type_space.num_zeta != 1:
            raise ValidationError("dynamic scenarios use a single influence type")
        if not np.all(s.influence.linear == 1.0) or not np.all(s.influence.quadratic == 0.0):
            raise ValidationError("dynamic scenarios require identity influence (loads equal allocations)")
        if self.kernel.num_types != s.type_space.num_theta:
            raise ValidationError("kernel type count must match the static type space")
        if not (0.0 < self.discount < 1.0):
            raise ValidationError("discount must lie strictly inside (0, 1)")
        if self.horizon < 1:
            raise ValidationError("horizon must be a positive integer")
        if self.discount**self.horizon > self.truncation_tol:
            raise ValidationError(
                f"horizon too short: discount**horizon = {self.discount**self.horizon:.3e} "
                f"exceeds the truncation tolerance {self.truncation_tol:.1e}"
            )
        rho0 = np.array(self.rho0, dtype=float)
        if rho0.shape != (s.type_space.num_theta,) or np.any(rho0 < 0) or abs(float(rho0.sum()) - 1.0) > 1e-12:
            raise ValidationError("rho0 must be a simplex vector over the utility types")
        rho0.setflags(write=False)
        object.__setattr__(self, "rho0", rho0)

    @property
    def num_types(self) -> int:
        return self.static.type_space.num_theta

    def slot_utility(self, theta: int, z) -> float:
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if np.any(z < 0):
            raise ValidationError("allocation components must be nonnegative")
        return float(np.dot(self.static.utility.weights[theta], np.log1p(z)))


@dataclass(frozen=True)
class Policy:
    """Open-loop per-slot per-type plan with its rollout artifacts.

    ``value_table[t, theta]`` is the discounted value of holding ``theta`` at
    slot ``t`` and following the plan thereafter (zero at the horizon).
    """

    mode: str
    allocations: np.ndarray  # (H, T, N)
    prices: np.ndarray  # (H, N); zeros where the plan was not market-cleared
    rho_path: np.ndarray  # (H + 1, T)
    value_table: np.ndarray  # (H + 1, T)
    welfare: float

    def __post_init__(self):
        for name in ("allocations", "prices", "rho_path", "value_table"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class SlotOutcome:
    """One slot of the mechanism: menu, prices, per-type payments and payoffs."""

    t: int
    z: np.ndarray  # (T, N)
    p: np.ndarray  # (N,)
    payments: np.ndarray  # (T,)
    payoffs: np.ndarray  # (T,)

    def __post_init__(self):
        for name in ("z", "p", "payments", "payoffs"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class DynamicIncentiveRow:
    t: int
    per_type_gap: dict[int, float]
    max_gap: float
    bound: float
    holds: bool


def _per_type_allocations(z, num_types: int) -> np.ndarray:
    """Coerce ``z`` to one row per type, keeping only the binned resource."""
    arr = np.asarray(z, dtype=float)
    if arr.ndim == 1 and arr.size == num_types:
        return arr
    if arr.ndim == 2 and arr.shape[0] == num_types:
        return arr[:, 0]
    raise ValidationError("one allocation per type is required")


def mean_field_step(state: MeanFieldState, z, kernel: TransitionKernel) -> MeanFieldState:
    """Deterministic population flow: one kernel application per type mass."""
    rho = state.rho
    bins = kernel.bin_of(_per_type_allocations(z, rho.size))
    q_cols = kernel.probabilities[:, np.arange(rho.size), bins]  # (T', T)
    return MeanFieldState(rho=q_cols @ rho, t=state.t + 1)


def mean_field_step_monte_carlo(
    state: MeanFieldState,
    z,
    kernel: TransitionKernel,
    num_samples: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Empirical next-slot distribution from independent sampled transitions."""
    rho = state.rho
    bins = kernel.bin_of(_per_type_allocations(z, rho.size))
    counts = rng.multinomial(num_samples, rho)
    next_counts = np.zeros(rho.size, dtype=np.int64)
    for theta, count in enumerate(counts):
        if count == 0:
            continue
        row = kernel.probabilities[:, theta, bins[theta]]
        next_counts += rng.multinomial(int(count), row)
    return next_counts / num_samples


def _myopic_plan(dyn: DynamicScenario, config: SolverConfig):
    """Slot-by-slot static solves along the mean-field trajectory."""
    num_types = dyn.num_types
    num_res = dyn.static.type_space.num_resources
    allocations = np.empty((dyn.horizon, num_types, num_res))
    prices = np.empty((dyn.horizon, num_res))
    rho_path = np.empty((dyn.horizon + 1, num_types))
    state = MeanFieldState(rho=dyn.rho0, t=0)
    rho_path[0] = state.rho
    for t in range(dyn.horizon):
        solution = solve_weighted(dyn.static, state.rho, dyn.static.capacities, config)
        allocations[t] = solution.z
        prices[t] = solution.p
        state = mean_field_step(state, solution.z, dyn.kernel)
        rho_path[t + 1] = state.rho
    return allocations, prices, rho_path


def _value_table(dyn: DynamicScenario, allocations: np.ndarray) -> np.ndarray:
    """Back up per-type discounted values of following a plan."""
    horizon, num_types = allocations.shape[0], dyn.num_types
    table = np.zeros((horizon + 1, num_types))
    w = dyn.static.utility.weights
    for t in range(horizon - 1, -1, -1):
        bins = dyn.kernel.bin_of(allocations[t][:, 0])
        inst = np.sum(w * np.log1p(allocations[t]), axis=1)
        cont = np.array(
            [dyn.kernel.probabilities[:, theta, bins[theta]] @ table[t + 1] for theta in range(num_types)]
        )
        table[t] = inst + dyn.discount * cont
    return table


def plan_welfare(dyn: DynamicScenario, allocations: np.ndarray, rho_path: np.ndarray) -> float:
    """Discounted population welfare of a plan along its own trajectory."""
    w = dyn.static.utility.weights
    total = 0.0
    for t in range(allocations.shape[0]):
        inst = np.sum(w * np.log1p(allocations[t]), axis=1)
        total += dyn.discount**t * float(rho_path[t] @ inst)
    return total


def _rollout_path(dyn: DynamicScenario, allocations: np.ndarray) -> np.ndarray:
    state = MeanFieldState(rho=dyn.rho0, t=0)
    path = np.empty((allocations.shape[0] + 1, dyn.num_types))
    path[0] = state.rho
    for t in range(allocations.shape[0]):
        state = mean_field_step(state, allocations[t], dyn.kernel)
        path[t + 1] = state.rho
    return path


ORACLE_MAX_TYPES = 3
ORACLE_MIN_GRID = 50


def plan_policy(
    dyn: DynamicScenario,
    mode: Literal["myopic", "lookahead-oracle"] = "myopic",
    config: SolverConfig = DEFAULT_CONFIG,
    grid_levels: int = ORACLE_MIN_GRID,
) -> Policy:
    """Build an open-loop plan.

    ``myopic`` solves the static program slot by slot (optimal whenever the
    kernel is allocation-independent, since the flow is then beyond the
    planner's control).  ``lookahead-oracle`` is the verification planner for
    small instances (at most three types, one resource): it rolls out every
    constant per-type allocation from a grid of at least fifty levels plus
    the myopic plan itself, and keeps the best discounted welfare, so it can
    never fall below the myopic plan.
    """
    myopic_alloc, myopic_prices, myopic_path = _myopic_plan(dyn, config)
    myopic_welf = plan_welfare(dyn, myopic_alloc, myopic_path)
    if mode == "myopic":
        return Policy(
            mode="myopic",
            allocations=myopic_alloc,
            prices=myopic_prices,
            rho_path=myopic_path,
            value_table=_value_table(dyn, myopic_alloc),
            welfare=myopic_welf,
        )
    if mode != "lookahead-oracle":
        raise ValidationError(f"unknown planning mode {mode!r}")
    num_types = dyn.num_types
    if num_types > ORACLE_MAX_TYPES or dyn.static.type_space.num_resources != 1:
        raise ValidationError(
            f"lookahead-oracle is guarded to at most {ORACLE_MAX_TYPES} types and one resource"
        )
    if grid_levels < ORACLE_MIN_GRID:
        raise ValidationError(f"the oracle grid needs at least {ORACLE_MIN_GRID} levels")

    cap = float(dyn.static.capacities[0])
    z_ub = min(dyn.static.z_max, cap / max(float(np.min(dyn.rho0[dyn.rho0 > 0])), 1e-9))
    z_ub = min(z_ub, float(dyn.kernel.bin_edges[-1]))
    levels = np.linspace(0.0, z_ub, grid_levels)
    grids = np.meshgrid(*([levels] * num_types), indexing="ij")
    candidates = np.stack([g.ravel() for g in grids], axis=1)  # (M, T)

    w = dyn.static.utility.weights[:, 0]
    inst_by_type = w[None, :] * np.log1p(candidates)  # (M, T)
    bins = dyn.kernel.bin_of(candidates.ravel()).reshape(candidates.shape)
    # Gather transition columns once per candidate/type: q[m, theta, theta'].
    q = np.transpose(dyn.kernel.probabilities, (1, 2, 0))  # (T, B, T')
    q_cand = q[np.arange(num_types)[None, :], bins]  # (M, T, T')

    rho = np.tile(dyn.rho0, (candidates.shape[0], 1))
    welfare = np.zeros(candidates.shape[0])
    alive = np.ones(candidates.shape[0], dtype=bool)
    feas_tol = 1e-12 * max(cap, 1.0)
    for t in range(dyn.horizon):
        load = np.sum(rho * candidates, axis=1)
        alive &= load <= cap + feas_tol
        welfare += np.where(alive, dyn.discount**t * np.sum(rho * inst_by_type, axis=1), 0.0)
        rho = np.einsum("mt,mtu->mu", rho, q_cand)
    welfare = np.where(alive, welfare, -np.inf)

    best = int(np.argmax(welfare))
    if welfare[best] > myopic_welf:
        alloc = np.tile(candidates[best][None, :, None], (dyn.horizon, 1, 1))
        path = _rollout_path(dyn, alloc)
        return Policy(
            mode="lookahead-oracle",
            allocations=alloc,
            prices=np.zeros((dyn.horizon, 1)),
            rho_path=path,
            value_table=_value_table(dyn, alloc),
            welfare=float(welfare[best]),
        )
    return Policy(
        mode="lookahead-oracle",
        allocations=myopic_alloc,
        prices=myopic_prices,
        rho_path=myopic_path,
        value_table=_value_table(dyn, myopic_alloc),
        welfare=myopic_welf,
    )


def value_u_sigma(
    dyn: DynamicScenario,
    policy: Policy,
    theta: int,
    z,
    state: MeanFieldState,
) -> float:
    """Instantaneous utility of ``z`` plus the discounted policy continuation.

    The continuation rolls the agent's own type forward under the kernel
    (exact propagation over the finite type set) while the population follows
    the policy's mean-field path; it is evaluated from the policy's value
    table, frozen at planning time.
    """
    if state.t >= policy.allocations.shape[0]:
        raise ValidationError("slot index beyond the planned horizon")
    bins = dyn.kernel.bin_of(np.atleast_1d(np.asarray(z, dtype=float))[:1])
    cont = float(dyn.kernel.probabilities[:, theta, bins[0]] @ policy.value_table[state.t + 1])
    return dyn.slot_utility(theta, z) + dyn.discount * cont


def _binned_best_response(dyn, policy, state, theta: int, price: float) -> float:
    """Maximize ``u(theta, z) + cont(bin(z)) - price*z`` over z in the bin range.

    Within one bin the continuation is constant, so the maximizer is the
    static log-utility response clamped to the bin; the best bin wins.  The
    map is nonincreasing in price (higher prices never favor larger bins).
    """
    w = float(dyn.static.utility.weights[theta, 0])
    edges = dyn.kernel.bin_edges
    z_cap = min(dyn.static.z_max, float(edges[-1]))
    cont_row = dyn.discount * (policy.value_table[state.t + 1] @ dyn.kernel.probabilities[:, theta, :])
    best_value, best_z = -math.inf, 0.0
    for k in range(dyn.kernel.num_bins):
        lo = max(0.0, float(edges[k]))
        hi = min(z_cap, float(edges[k + 1]))
        if lo > hi:
            continue
        unclamped = w / price - 1.0 if price > 0 else z_cap
        z_k = min(max(unclamped, lo), hi)
        value = w * math.log1p(z_k) + cont_row[k] - price * z_k
        if value > best_value + 1e-15:
            best_value, best_z = value, z_k
    return best_z


def dynamic_mechanism_step(
    reports: np.ndarray,
    dyn: DynamicScenario,
    policy: Policy,
    state: MeanFieldState,
    config: SolverConfig = DEFAULT_CONFIG,
    include_rebate: bool = False,
) -> SlotOutcome:
    """Price one slot against reported shares and charge ``p . z`` per type.

    ``reports`` is the reported type distribution for the slot.  Each type's
    objective is its instantaneous utility plus the frozen policy
    continuation; with an allocation-independent kernel this reduces exactly
    to the static program.  ``include_rebate`` subtracts the per-capita
    ``beta * C_n`` from every payment for budget-comparison experiments.
    """
    reports = np.asarray(reports, dtype=float)
    num_types = dyn.num_types
    if reports.shape != (num_types,) or np.any(reports < -1e-12) or abs(float(reports.sum()) - 1.0) > 1e-9:
        raise ValidationError("reports must be a distribution over the utility types")
    reports = np.maximum(reports, 0.0)
    if state.t >= policy.allocations.shape[0]:
        raise ValidationError("slot index beyond the planned horizon")

    caps = dyn.static.capacities
    if dyn.kernel.allocation_independent:
        solution = solve_weighted(dyn.static, reports, caps, config)
        z, p = solution.z, solution.p
    else:
        if dyn.static.type_space.num_resources != 1:
            raise ValidationError("allocation-dependent kernels are supported for a single resource only")
        cap = float(caps[0])
        w = dyn.static.utility.weights[:, 0]
        cont_span = float(np.max(policy.value_table[state.t + 1]) - np.min(policy.value_table[state.t + 1]))
        first_edge = float(dyn.kernel.bin_edges[1]) if dyn.kernel.num_bins > 1 else 1.0
        p_hi = float(np.max(w)) + dyn.discount * cont_span / max(first_edge, 1e-9) + 1.0

        def demand(price: float) -> float:
            return float(
                sum(
                    reports[theta] * _binned_best_response(dyn, policy, state, theta, price)
                    for theta in range(num_types)
                )
            )

        if demand(0.0) <= cap:
            price = 0.0
        else:
            lo, hi = 0.0, p_hi
            for _ in range(config.max_bisection_iters):
                mid = 0.5 * (lo + hi)
                if mid == lo or mid == hi:
                    break
                if demand(mid) > cap:
                    lo = mid
                else:
                    hi = mid
            price = hi
            if abs(demand(price) - cap) > 1e-6 * max(cap, 1.0):
                raise SolverError(
                    "slot market failed to clear: the binned objective produced a demand jump "
                    f"of {abs(demand(price) - cap):.3e} at the capacity"
                )
        z = np.array(
            [[_binned_best_response(dyn, policy, state, theta, price)] for theta in range(num_types)]
        )
        p = np.array([price])

    payments = z @ p
    if include_rebate:
        payments = payments - dyn.static.beta * float(caps @ p)
    payoffs = np.array(
        [value_u_sigma(dyn, policy, theta, z[theta], state) - payments[theta] for theta in range(num_types)]
    )
    return SlotOutcome(t=state.t, z=z, p=p, payments=payments, payoffs=payoffs)


def dynamic_incentive_gap(
    dyn: DynamicScenario,
    policy: Policy,
    num_agents: int | None,
    config: SolverConfig = DEFAULT_CONFIG,
) -> list[DynamicIncentiveRow]:
    """Per-slot best misreport gains along the truthful trajectory.

    ``num_agents=None`` freezes prices (a lone report cannot move the slot
    shares); a finite head count moves the reported shares by exactly
    ``1/num_agents`` and re-solves the slot.  Each row compares the measured
    gap with the quadratic ceiling evaluated at that slot's smallest share.
    """
    num_types = dyn.num_types
    l_theta_sum = float(np.sum(np.max(dyn.static.utility.weights, axis=1)))
    caps_sq = float(np.sum(dyn.static.capacities**2))
    rows: list[DynamicIncentiveRow] = []
    for t in range(dyn.horizon):
        rho_t = policy.rho_path[t]
        state = MeanFieldState(rho=rho_t, t=t)
        if num_agents is not None and np.any(rho_t <= 0):
            raise ValidationError(f"bound undefined: a type share hits zero at slot {t}")

        def payoff(theta: int, report: int) -> float:
            if num_agents is None or report == theta:
                shares = rho_t  # a truthful report leaves the slot shares untouched
            else:
                shares = rho_t.copy()
                shares[theta] -= 1.0 / num_agents
                shares[report] += 1.0 / num_agents
                if shares[theta] < -1e-12:
                    return -math.inf  # fewer than one agent of this type at this slot
                shares = np.maximum(shares, 0.0)
            slot = dynamic_mechanism_step(shares, dyn, policy, state, config)
            return value_u_sigma(dyn, policy, theta, slot.z[report], state) - float(slot.z[report] @ slot.p)

        per_type: dict[int, float] = {}
        for theta in range(num_types):
            if num_agents is not None and rho_t[theta] * num_agents < 1.0 - 1e-9:
                continue  # no whole agent of this type to deviate
            truthful = payoff(theta, theta)
            best = 0.0
            for alt in range(num_types):
                if alt != theta:
                    best = max(best, payoff(theta, alt) - truthful)
            per_type[theta] = best

        if num_agents is None:
            bound = 0.0
        else:
            min_rho = float(np.min(rho_t))
            bound = (2.0 / num_agents**2) * l_theta_sum * caps_sq / (1.0 * min_rho**4)
        max_gap = max(per_type.values()) if per_type else 0.0
        rows.append(
            DynamicIncentiveRow(
                t=t,
                per_type_gap=per_type,
                max_gap=max_gap,
                bound=bound,
                holds=(max_gap <= bound * (1.0 + 1e-6)) if num_agents is not None else max_gap <= 1e-9,
            )
        )
    return rows


# -- Dynamic scenario document ------------------------------------------------


def save_dynamic_scenario(dyn: DynamicScenario) -> bytes:
    doc = scenario_to_dict(dyn.static)
    doc["kernel"] = {
        "probabilities": dyn.kernel.probabilities.tolist(),
        "bin_edges": dyn.kernel.bin_edges.tolist(),
    }
    doc["discount"] = dyn.discount
    doc["horizon"] = dyn.horizon
    doc["rho0"] = dyn.rho0.tolist()
    doc["truncation_tol"] = dyn.truncation_tol
    return json.dumps(doc, indent=2, sort_keys=True).encode("utf-8")


def load_dynamic_scenario(source: bytes | str) -> DynamicScenario:
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"dynamic scenario document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("dynamic scenario document must be a JSON object")
    for key in ("kernel", "discount", "horizon", "rho0"):
        if key not in doc:
            raise ValidationError(f"dynamic scenario document is missing field {key!r}")
    static = scenario_from_dict({k: v for k, v in doc.items() if k not in
                                 ("kernel", "discount", "horizon", "rho0", "truncation_tol")})
    kernel_doc = doc["kernel"]
    if "probabilities" not in kernel_doc or "bin_edges" not in kernel_doc:
        raise ValidationError("dynamic scenario document is missing field 'kernel.probabilities' or 'kernel.bin_edges'")
    try:
        return DynamicScenario(
            static=static,
            kernel=TransitionKernel(
                probabilities=kernel_doc["probabilities"],
                bin_edges=kernel_doc["bin_edges"],
            ),
            discount=doc["discount"],
            horizon=doc["horizon"],
            rho0=doc["rho0"],
            truncation_tol=doc.get("truncation_tol", 1e-6),
        )
    except ValidationError:
        raise
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"malformed dynamic scenario document: {exc}") from exc
