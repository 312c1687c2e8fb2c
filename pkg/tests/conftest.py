import pytest

from lsvcg.generate import (
    incentive_benchmark,
    payment_gap_benchmark,
    rng_for,
    single_type_benchmark,
)


@pytest.fixture
def bench1():
    """One type, one resource: z* = 1, p* = 0.5."""
    return single_type_benchmark()


@pytest.fixture
def bench_gap():
    return payment_gap_benchmark()


@pytest.fixture
def bench_incentive():
    return incentive_benchmark()


@pytest.fixture
def rng():
    return rng_for(20250811)
