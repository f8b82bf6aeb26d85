import hypothesis
import pytest

from bwflow import analytic, flow

hypothesis.settings.register_profile(
    "suite", max_examples=25, deadline=None,
    suppress_health_check=[hypothesis.HealthCheck.too_slow])
hypothesis.settings.load_profile("suite")


@pytest.fixture(scope="session")
def generic_spec():
    # strict-gap block with rho = sqrt(5); the workhorse example
    return analytic.block_spec([(1.0, 2.0, 0.5)], label="generic")


@pytest.fixture(scope="session")
def generic_traj(generic_spec):
    return flow.integrate(generic_spec, t_end=5.0)
