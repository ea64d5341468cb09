import pytest

import leqlab.policy as policy
import leqlab.riccati as riccati
from leqlab.verify import coupled_reference_spec, scalar_benchmark_spec

N_STEPS = 2048


@pytest.fixture(scope="session")
def bench_spec():
    return scalar_benchmark_spec()


@pytest.fixture(scope="session")
def bench_sol(bench_spec):
    return riccati.solve(bench_spec, N_STEPS)


@pytest.fixture(scope="session")
def bench_policy(bench_spec, bench_sol):
    return policy.optimal_feedback(bench_spec, bench_sol)


@pytest.fixture(scope="session")
def bench_fields(bench_spec, bench_policy):
    return policy.policy_fbsde_fields(bench_spec, bench_policy, N_STEPS)


@pytest.fixture(scope="session")
def coupled_spec():
    return coupled_reference_spec()


@pytest.fixture(scope="session")
def coupled_sol(coupled_spec):
    return riccati.solve(coupled_spec, N_STEPS)


@pytest.fixture(scope="session")
def coupled_policy(coupled_spec, coupled_sol):
    return policy.optimal_feedback(coupled_spec, coupled_sol)


@pytest.fixture(scope="session")
def coupled_fields(coupled_spec, coupled_policy):
    return policy.policy_fbsde_fields(coupled_spec, coupled_policy, N_STEPS)
