#!/usr/bin/env python3
"""Obedience margins under the distributed price-broadcast algorithm.

For a handful of random two-type economies, one agent tries every
impersonation against an otherwise obedient population of 1000 and the
payoff margin of obeying is printed; margins shrink toward zero from above
as the population grows, which is the equilibrium property the payment
overlay is meant to deliver.
"""

from lsvcg.generate import obedience_scenario, rng_for, scale_capacity
from lsvcg.superimpose import AlgorithmConfig, obedience_check

NUM_AGENTS = 1000


def main() -> None:
    config = AlgorithmConfig(tolerance=1e-8)
    print(f"{'scenario':>8} {'type':>8} {'obedient':>12} {'best dev':>12} {'margin':>12}")
    for k in range(5):
        scenario = scale_capacity(obedience_scenario(rng_for(7, k), NUM_AGENTS), NUM_AGENTS)
        for r in range(scenario.type_space.num_types):
            deviator = scenario.type_space.unflatten(r)
            obedient, best_dev, margin = obedience_check(scenario, NUM_AGENTS, deviator, config)
            print(f"{k:>8} {str(deviator):>8} {obedient:>12.6f} {best_dev:>12.6f} {margin:>12.3e}")


if __name__ == "__main__":
    main()
