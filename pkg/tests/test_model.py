import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsvcg.generate import random_scenario, rng_for
from lsvcg.model import (
    InfluenceParams,
    Population,
    Scenario,
    TypeSpace,
    UtilityParams,
    ValidationError,
    empirical_population,
    influence_derivative,
    influence_value,
    load_scenario,
    save_scenario,
    utility_gradient,
    utility_value,
)


def test_utility_value_at_zero_is_zero():
    u = UtilityParams(weights=[[1.0]])
    assert utility_value(u, 0, [0.0]) == 0.0


def test_utility_value_unit_log_terms():
    # each term log(1 + (e - 1)) = 1
    u = UtilityParams(weights=[[2.0, 3.0]])
    x = [math.e - 1.0, math.e - 1.0]
    assert utility_value(u, 0, x) == pytest.approx(5.0, abs=1e-12)


def test_utility_value_direct_evaluation():
    u = UtilityParams(weights=[[1.5]])
    assert utility_value(u, 0, [4.0]) == pytest.approx(1.5 * math.log(5.0), rel=1e-14)


def test_utility_value_rejects_negative_allocation():
    u = UtilityParams(weights=[[1.0]])
    with pytest.raises(ValidationError):
        utility_value(u, 0, [-0.1])


def test_utility_gradient_closed_form():
    u = UtilityParams(weights=[[1.0]])
    assert utility_gradient(u, 0, [0.0])[0] == pytest.approx(1.0)
    u2 = UtilityParams(weights=[[2.0]])
    assert utility_gradient(u2, 0, [1.0])[0] == pytest.approx(1.0)


def test_utility_gradient_matches_finite_differences():
    rng = rng_for(1, 0)
    w = rng.uniform(0.5, 3.0, size=(1, 3))
    u = UtilityParams(weights=w)
    for _ in range(100):
        x = rng.uniform(0.0, 5.0, size=3)
        grad = utility_gradient(u, 0, x)
        h = 1e-6
        for n in range(3):
            xp, xm = x.copy(), x.copy()
            xp[n] += h
            xm[n] = max(xm[n] - h, 0.0)
            fd = (utility_value(u, 0, xp) - utility_value(u, 0, xm)) / (xp[n] - xm[n])
            assert grad[n] == pytest.approx(fd, rel=1e-6)


def test_influence_closed_forms():
    f = InfluenceParams(linear=[[1.0]], quadratic=[[0.0]])
    assert influence_value(f, 0, 0, 2.0) == pytest.approx(2.0)
    f2 = InfluenceParams(linear=[[1.0]], quadratic=[[0.5]])
    assert influence_value(f2, 0, 0, 2.0) == pytest.approx(4.0)
    assert influence_value(f2, 0, 0, 0.0) == 0.0
    assert influence_derivative(f, 0, 0, 7.3) == pytest.approx(1.0)
    f3 = InfluenceParams(linear=[[2.0]], quadratic=[[1.0]])
    assert influence_derivative(f3, 0, 0, 3.0) == pytest.approx(8.0)


def test_influence_rejects_negative_argument():
    f = InfluenceParams(linear=[[1.0]], quadratic=[[0.0]])
    with pytest.raises(ValidationError):
        influence_value(f, 0, 0, -1.0)
    with pytest.raises(ValidationError):
        influence_derivative(f, 0, 0, -1.0)


def test_influence_derivative_matches_finite_differences():
    rng = rng_for(1, 1)
    f = InfluenceParams(linear=rng.uniform(0.5, 2.0, (2, 2)), quadratic=rng.uniform(0.0, 1.0, (2, 2)))
    for _ in range(50):
        x = float(rng.uniform(0.1, 4.0))
        z, n = int(rng.integers(2)), int(rng.integers(2))
        h = 1e-6
        fd = (influence_value(f, z, n, x + h) - influence_value(f, z, n, x - h)) / (2 * h)
        assert influence_derivative(f, z, n, x) == pytest.approx(fd, abs=1e-8 * max(1.0, abs(fd)))


@given(
    lam=st.floats(0.01, 0.99),
    x=st.lists(st.floats(0.0, 10.0), min_size=2, max_size=2),
    y=st.lists(st.floats(0.0, 10.0), min_size=2, max_size=2),
)
@settings(max_examples=200, deadline=None)
def test_utility_concavity_and_monotonicity(lam, x, y):
    u = UtilityParams(weights=[[1.3, 0.7]])
    x, y = np.array(x), np.array(y)
    mid = lam * x + (1 - lam) * y
    assert utility_value(u, 0, mid) >= lam * utility_value(u, 0, x) + (1 - lam) * utility_value(u, 0, y) - 1e-12
    bigger = x + 0.5
    assert utility_value(u, 0, bigger) > utility_value(u, 0, x)


@given(
    lam=st.floats(0.01, 0.99),
    x=st.floats(0.0, 10.0),
    y=st.floats(0.0, 10.0),
)
@settings(max_examples=200, deadline=None)
def test_influence_convexity(lam, x, y):
    f = InfluenceParams(linear=[[1.1]], quadratic=[[0.4]])
    mid = lam * x + (1 - lam) * y
    assert influence_value(f, 0, 0, mid) <= lam * influence_value(f, 0, 0, x) + (1 - lam) * influence_value(
        f, 0, 0, y
    ) + 1e-12


def test_population_rejects_bad_shares():
    with pytest.raises(ValidationError):
        Population(shares=[0.5, 0.4], num_agents=10)  # does not sum to 1
    with pytest.raises(ValidationError):
        Population(shares=[1.0, 0.0], num_agents=10)  # zero share
    with pytest.raises(ValidationError):
        Population(shares=[0.55, 0.45], num_agents=10)  # 5.5 agents of a type


def test_empirical_population_counts():
    ts = TypeSpace(num_theta=2, num_zeta=1, num_resources=1)
    pop = empirical_population([(0, 0), (0, 0), (1, 0), (1, 0)], ts)
    assert pop.num_agents == 4
    assert np.allclose(pop.shares, [0.5, 0.5])

    one = empirical_population([(0, 0)], TypeSpace(1, 1, 1))
    assert one.num_agents == 1 and one.shares[0] == 1.0

    big = empirical_population([(0, 0)] * 60 + [(1, 0)] * 40, ts)
    assert np.allclose(big.shares, [0.6, 0.4])
    assert abs(big.shares.sum() - 1.0) <= 1e-12


def test_empirical_population_rejects_empty():
    with pytest.raises(ValidationError):
        empirical_population([], TypeSpace(1, 1, 1))


def test_minimal_document_round_trip(bench1):
    loaded = load_scenario(save_scenario(bench1))
    assert loaded.type_space == bench1.type_space
    assert np.array_equal(loaded.utility.weights, bench1.utility.weights)
    assert np.array_equal(loaded.capacities, bench1.capacities)
    assert loaded.beta == bench1.beta and loaded.z_max == bench1.z_max


def test_document_share_sum_validation(bench1):
    import json

    doc = json.loads(save_scenario(bench1))
    doc["population"]["shares"] = [0.9]
    with pytest.raises(ValidationError):
        load_scenario(json.dumps(doc))


def test_document_missing_field_names_it(bench1):
    import json

    doc = json.loads(save_scenario(bench1))
    del doc["capacities"]
    with pytest.raises(ValidationError, match="capacities"):
        load_scenario(json.dumps(doc))


def test_document_rejects_undersized_cap(bench1):
    import json
    from dataclasses import replace

    # in-memory scenarios may have slack capacity, but documents must not
    slack = replace(bench1, z_max=0.5)
    doc = json.loads(save_scenario(slack))
    with pytest.raises(ValidationError, match="z_max"):
        load_scenario(json.dumps(doc))


@given(seed=st.integers(0, 2**31 - 1))
@settings(max_examples=40, deadline=None)
def test_random_scenario_round_trip_is_exact(seed):
    rng = rng_for(seed)
    scenario = random_scenario(
        rng,
        num_theta=int(rng.integers(1, 3)),
        num_zeta=int(rng.integers(1, 3)),
        num_resources=int(rng.integers(1, 3)),
        num_agents=8,
        quadratic=bool(rng.integers(2)),
    )
    loaded = load_scenario(save_scenario(scenario))
    assert np.array_equal(loaded.utility.weights, scenario.utility.weights)
    assert np.array_equal(loaded.influence.linear, scenario.influence.linear)
    assert np.array_equal(loaded.influence.quadratic, scenario.influence.quadratic)
    assert np.array_equal(loaded.population.shares, scenario.population.shares)
    assert loaded.population.num_agents == scenario.population.num_agents
    assert np.array_equal(loaded.capacities, scenario.capacities)
    assert loaded.beta == scenario.beta and loaded.z_max == scenario.z_max


def test_infinite_population_serializes_as_string():
    rng = rng_for(5)
    scenario = random_scenario(rng, num_agents=None)
    blob = save_scenario(scenario)
    assert b'"infinite"' in blob
    assert not load_scenario(blob).population.is_finite


def test_model_arrays_are_immutable(bench1):
    with pytest.raises(ValueError):
        bench1.utility.weights[0, 0] = 2.0
    with pytest.raises(ValueError):
        bench1.population.shares[0] = 0.5
