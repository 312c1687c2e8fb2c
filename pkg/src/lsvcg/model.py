"""Static resource-allocation model: types, utilities, influences, populations.

An agent's type is a pair ``(theta, zeta)``.  ``theta`` indexes a row of
utility weights, ``zeta`` a row of influence coefficients.  Utility of an
allocation ``x`` (one nonnegative amount per resource) is

    U(theta, x) = sum_n weights[theta, n] * log(1 + x_n)

and the load an agent places on resource ``n`` is

    f_{zeta,n}(x_n) = linear[zeta, n] * x_n + quadratic[zeta, n] * x_n**2.

Both families are chosen for closed-form best responses: the utility is
strictly increasing and strictly concave, the influence increasing and
convex with f(0) = 0 and f' bounded below by the linear coefficient.

Flattened type indices are row-major: ``r = theta * num_zeta + zeta``.
All model objects are immutable after construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "ValidationError",
    "TypeSpace",
    "UtilityParams",
    "InfluenceParams",
    "Population",
    "Scenario",
    "INFINITE",
    "utility_value",
    "utility_gradient",
    "influence_value",
    "influence_derivative",
    "empirical_population",
    "load_scenario",
    "save_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
]

#: Sentinel for an unbounded (mean-field) population.  Serialized as the
#: string ``"infinite"``.
INFINITE = None

_SHARE_SUM_TOL = 1e-12


class ValidationError(ValueError):
    """A model object or scenario document violates an invariant."""


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TypeSpace:
    """Cardinalities of the utility types, influence types, and resources."""

    num_theta: int
    num_zeta: int
    num_resources: int

    def __post_init__(self):
        for name in ("num_theta", "num_zeta", "num_resources"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")

    @property
    def num_types(self) -> int:
        return self.num_theta * self.num_zeta

    def flat_index(self, theta: int, zeta: int) -> int:
        if not (0 <= theta < self.num_theta and 0 <= zeta < self.num_zeta):
            raise ValidationError(f"type ({theta}, {zeta}) outside the type space")
        return theta * self.num_zeta + zeta

    def unflatten(self, r: int) -> tuple[int, int]:
        if not (0 <= r < self.num_types):
            raise ValidationError(f"flat type index {r} outside the type space")
        return divmod(r, self.num_zeta)


@dataclass(frozen=True)
class UtilityParams:
    """Log-utility weights, one row per theta, one column per resource."""

    weights: np.ndarray  # (num_theta, num_resources), all > 0

    def __post_init__(self):
        w = _frozen_array(self.weights)
        if w.ndim != 2:
            raise ValidationError("utility.weights must be a 2-D array (theta x resource)")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValidationError("utility.weights must be finite and strictly positive")
        object.__setattr__(self, "weights", w)

    def smoothness(self, theta: int) -> float:
        """Curvature bound for row ``theta``: |d2U/dx2| <= max_n w[theta, n]."""
        return float(np.max(self.weights[theta]))


@dataclass(frozen=True)
class InfluenceParams:
    """Linear-plus-quadratic influence coefficients, one row per zeta."""

    linear: np.ndarray  # (num_zeta, num_resources), all > 0
    quadratic: np.ndarray  # (num_zeta, num_resources), all >= 0

    def __post_init__(self):
        a = _frozen_array(self.linear)
        b = _frozen_array(self.quadratic)
        if a.ndim != 2 or b.shape != a.shape:
            raise ValidationError("influence.linear and influence.quadratic must be equal-shape 2-D arrays")
        if not np.all(np.isfinite(a)) or np.any(a <= 0):
            raise ValidationError("influence.linear must be finite and strictly positive")
        if not np.all(np.isfinite(b)) or np.any(b < 0):
            raise ValidationError("influence.quadratic must be finite and nonnegative")
        object.__setattr__(self, "linear", a)
        object.__setattr__(self, "quadratic", b)

    @property
    def derivative_lower_bound(self) -> float:
        """Global lower bound on f' over x >= 0 (the smallest linear coefficient)."""
        return float(np.min(self.linear))


@dataclass(frozen=True)
class Population:
    """Distribution of agents over flattened types, plus the head count.

    ``shares`` sums to one.  ``num_agents`` is a positive integer, or
    :data:`INFINITE` for the mean-field regime.  Finite populations must be
    empirical: every ``share * num_agents`` is an integer.
    """

    shares: np.ndarray  # (num_types,), all > 0, sums to 1
    num_agents: int | None = INFINITE

    def __post_init__(self):
        s = _frozen_array(self.shares)
        if s.ndim != 1:
            raise ValidationError("population.shares must be a 1-D array over flattened types")
        if not np.all(np.isfinite(s)) or np.any(s <= 0):
            raise ValidationError("population.shares must be finite and strictly positive")
        if abs(float(s.sum()) - 1.0) > _SHARE_SUM_TOL:
            raise ValidationError(f"population.shares must sum to 1 (got {float(s.sum())!r})")
        object.__setattr__(self, "shares", s)
        if self.num_agents is not INFINITE:
            n = self.num_agents
            if not isinstance(n, (int, np.integer)) or n < 1:
                raise ValidationError(f"population.num_agents must be a positive integer or 'infinite', got {n!r}")
            counts = s * n
            if np.any(np.abs(counts - np.round(counts)) > 1e-9):
                raise ValidationError("population.shares times num_agents must be integral (empirical population)")
            object.__setattr__(self, "num_agents", int(n))

    @property
    def is_finite(self) -> bool:
        return self.num_agents is not INFINITE

    def counts(self) -> np.ndarray:
        """Integer count per flattened type.  Finite populations only."""
        if not self.is_finite:
            raise ValidationError("an infinite population has no counts")
        return np.round(self.shares * self.num_agents).astype(int)


@dataclass(frozen=True)
class Scenario:
    """A complete static problem instance.

    ``capacities`` are the per-resource constraint levels of the
    share-weighted program ``sum_r shares[r] * f_r(z_r) <= C_n``; operations
    that solve a head-count program rescale them explicitly.  ``z_max`` caps
    each per-resource allocation so the price-zero best response is finite.
    """

    type_space: TypeSpace
    utility: UtilityParams
    influence: InfluenceParams
    population: Population
    capacities: np.ndarray  # (num_resources,), all > 0
    beta: float = 0.0
    z_max: float = 1e6

    def __post_init__(self):
        ts = self.type_space
        c = _frozen_array(self.capacities)
        if c.shape != (ts.num_resources,):
            raise ValidationError(f"capacities must have shape ({ts.num_resources},), got {c.shape}")
        if not np.all(np.isfinite(c)) or np.any(c <= 0):
            raise ValidationError("capacities must be finite and strictly positive")
        object.__setattr__(self, "capacities", c)
        if self.utility.weights.shape != (ts.num_theta, ts.num_resources):
            raise ValidationError(
                f"utility.weights must have shape ({ts.num_theta}, {ts.num_resources}), "
                f"got {self.utility.weights.shape}"
            )
        if self.influence.linear.shape != (ts.num_zeta, ts.num_resources):
            raise ValidationError(
                f"influence.linear must have shape ({ts.num_zeta}, {ts.num_resources}), "
                f"got {self.influence.linear.shape}"
            )
        if self.population.shares.shape != (ts.num_types,):
            raise ValidationError(
                f"population.shares must have shape ({ts.num_types},), got {self.population.shares.shape}"
            )
        if not (0.0 <= self.beta <= 1.0):
            raise ValidationError(f"beta must lie in [0, 1], got {self.beta!r}")
        if not (math.isfinite(self.z_max) and self.z_max > 0):
            raise ValidationError(f"z_max must be finite and positive, got {self.z_max!r}")

    # Flattened per-type parameter tables (num_types x num_resources).

    def type_weights(self) -> np.ndarray:
        return np.repeat(self.utility.weights, self.type_space.num_zeta, axis=0)

    def type_linear(self) -> np.ndarray:
        return np.tile(self.influence.linear, (self.type_space.num_theta, 1))

    def type_quadratic(self) -> np.ndarray:
        return np.tile(self.influence.quadratic, (self.type_space.num_theta, 1))

    def saturation_headroom(self) -> np.ndarray:
        """Per-resource share-weighted influence at ``z_max`` minus capacity.

        Nonnegative everywhere means the cap can never bind before capacity
        does; scenario documents are required to satisfy this at load time.
        """
        a = self.type_linear()
        b = self.type_quadratic()
        f_at_cap = a * self.z_max + b * self.z_max**2
        return self.population.shares @ f_at_cap - self.capacities


def utility_value(utility: UtilityParams, theta: int, x) -> float:
    """``sum_n w[theta, n] * log(1 + x_n)`` for a nonnegative allocation."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValidationError("allocation components must be nonnegative")
    return float(np.dot(utility.weights[theta], np.log1p(x)))


def utility_gradient(utility: UtilityParams, theta: int, x) -> np.ndarray:
    """Componentwise marginal utility ``w[theta, n] / (1 + x_n)``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValidationError("allocation components must be nonnegative")
    return utility.weights[theta] / (1.0 + x)


def influence_value(influence: InfluenceParams, zeta: int, n: int, x: float) -> float:
    """``a*x + b*x**2`` for scalar ``x >= 0``."""
    if x < 0:
        raise ValidationError("influence argument must be nonnegative")
    a = influence.linear[zeta, n]
    b = influence.quadratic[zeta, n]
    return float(a * x + b * x * x)


def influence_derivative(influence: InfluenceParams, zeta: int, n: int, x: float) -> float:
    """``a + 2*b*x`` for scalar ``x >= 0``; always at least ``a``."""
    if x < 0:
        raise ValidationError("influence argument must be nonnegative")
    a = influence.linear[zeta, n]
    b = influence.quadratic[zeta, n]
    return float(a + 2.0 * b * x)


def empirical_population(assignments: Sequence[tuple[int, int]], type_space: TypeSpace) -> Population:
    """Population with shares equal to observed type frequencies."""
    if len(assignments) == 0:
        raise ValidationError("cannot build a population from an empty assignment list")
    counts = np.zeros(type_space.num_types, dtype=int)
    for theta, zeta in assignments:
        counts[type_space.flat_index(theta, zeta)] += 1
    total = int(counts.sum())
    present = counts > 0
    if not np.all(present):
        # Shares must be strictly positive; absent types are not part of the
        # empirical support, so the population is defined on the full space
        # only when every type occurs.
        raise ValidationError(
            "assignments must include at least one agent of every type "
            "(types with zero count violate the positive-share invariant)"
        )
    return Population(shares=counts / total, num_agents=total)


# -- Scenario document (JSON-compatible tree) --------------------------------


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "type_space": {
            "num_theta": s.type_space.num_theta,
            "num_zeta": s.type_space.num_zeta,
            "num_resources": s.type_space.num_resources,
        },
        "utility": {"weights": s.utility.weights.tolist()},
        "influence": {
            "linear": s.influence.linear.tolist(),
            "quadratic": s.influence.quadratic.tolist(),
        },
        "population": {
            "shares": s.population.shares.tolist(),
            "num_agents": "infinite" if not s.population.is_finite else s.population.num_agents,
        },
        "capacities": s.capacities.tolist(),
        "beta": s.beta,
        "z_max": s.z_max,
    }


def _require(doc: dict, key: str):
    node = doc
    for part in key.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ValidationError(f"scenario document is missing field {key!r}")
        node = node[part]
    return node


def scenario_from_dict(doc: dict) -> Scenario:
    ts = TypeSpace(
        num_theta=_require(doc, "type_space.num_theta"),
        num_zeta=_require(doc, "type_space.num_zeta"),
        num_resources=_require(doc, "type_space.num_resources"),
    )
    raw_agents = _require(doc, "population.num_agents")
    num_agents = INFINITE if raw_agents == "infinite" else raw_agents
    try:
        scenario = Scenario(
            type_space=ts,
            utility=UtilityParams(weights=_require(doc, "utility.weights")),
            influence=InfluenceParams(
                linear=_require(doc, "influence.linear"),
                quadratic=_require(doc, "influence.quadratic"),
            ),
            population=Population(shares=_require(doc, "population.shares"), num_agents=num_agents),
            capacities=_require(doc, "capacities"),
            beta=_require(doc, "beta"),
            z_max=_require(doc, "z_max"),
        )
    except ValidationError:
        raise
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"malformed scenario document: {exc}") from exc
    headroom = scenario.saturation_headroom()
    if np.any(headroom < 0):
        bad = int(np.argmin(headroom))
        raise ValidationError(
            f"z_max too small: share-weighted influence at z_max falls short of capacities[{bad}]"
        )
    return scenario


def save_scenario(s: Scenario) -> bytes:
    """Serialize to a JSON document; floats keep full round-trip precision."""
    return json.dumps(scenario_to_dict(s), indent=2, sort_keys=True).encode("utf-8")


def load_scenario(source: bytes | str) -> Scenario:
    """Parse and validate a scenario document produced by :func:`save_scenario`."""
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"scenario document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("scenario document must be a JSON object")
    return scenario_from_dict(doc)
