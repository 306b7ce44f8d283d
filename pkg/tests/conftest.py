import os

import pytest
from hypothesis import HealthCheck, settings

import radstab as rs

settings.register_profile("radstab", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "radstab"))


@pytest.fixture(scope="session")
def p5():
    return rs.power(5.0)


@pytest.fixture(scope="session")
def p2():
    return rs.power(2.0)


@pytest.fixture(scope="session")
def rational():
    return rs.power_rational(5.0, 3.0)


@pytest.fixture(scope="session")
def psum():
    return rs.power_sum_from_q(1.2, 1.3)
