#!/usr/bin/env python3
"""Measure how the best misreport gain decays with population size.

Runs the replication sweep on three scenario families and prints the fitted
log-log exponent next to the quadratic ceiling:

* the scaled-twin benchmark, where impersonating a twin type with
  proportionally scaled utility and influence leaves the agent's own bundle
  unchanged but understates its booked load.  The price relief is one part
  in I, and it pays off on the agent's whole consumption, so the gain decays
  at first order (exponent near -1);
* a generic two-type family, where every misreport changes the bundle the
  agent receives; the frozen-price loss is then a fixed negative number, the
  finite-population correction cannot overcome it at scale, and measured
  gains collapse to exactly zero;
* clone types, where deviations change nothing and gains are identically zero.

The ceiling decays at second order with a large constant, so it dominates
every measurement in the sweep by orders of magnitude even where the
measured decay is first-order.
"""

import numpy as np

from lsvcg.generate import incentive_benchmark, random_scenario, rng_for
from lsvcg.incentives import verify_incentive_bound
from lsvcg.model import InfluenceParams, Population, Scenario, TypeSpace, UtilityParams

SWEEP = [10, 20, 40, 80, 160, 320, 640, 1280]


def clone_scenario() -> Scenario:
    return Scenario(
        type_space=TypeSpace(2, 1, 1),
        utility=UtilityParams(weights=[[1.0], [1.0]]),
        influence=InfluenceParams(linear=[[1.0]], quadratic=[[0.0]]),
        population=Population(shares=[0.5, 0.5], num_agents=10),
        capacities=[1.0],
        beta=0.0,
        z_max=60.0,
    )


def run(name: str, scenario: Scenario) -> None:
    sweep = verify_incentive_bound(scenario, scenario.population, SWEEP)
    print(f"--- {name} ---")
    print(f"{'I':>6} {'max gain':>12} {'ceiling':>12} {'holds':>6}")
    for num_agents, gap, bound, holds in sweep.rows:
        print(f"{num_agents:>6} {gap:>12.4e} {bound:>12.4e} {str(holds):>6}")
    print(f"fitted log-log exponent: {sweep.slope if np.isfinite(sweep.slope) else 'undefined (no positive gains)'}")
    print()


def main() -> None:
    run("scaled twin (influence understatement)", incentive_benchmark())
    rng = rng_for(2024, 0)
    generic = random_scenario(rng, num_theta=2, num_zeta=1, num_resources=1, num_agents=10, beta=0.0)
    run("generic two-type", generic)
    run("clone types", clone_scenario())


if __name__ == "__main__":
    main()
