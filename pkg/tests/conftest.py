import pytest
from hypothesis import HealthCheck, settings

from intgw.model import ImmigrationDist, ModelSpec, OffspringDist

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running Monte Carlo checks")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def inarch2():
    return ModelSpec.inarch(2.0)


@pytest.fixture
def dirac_fixture():
    return ModelSpec(OffspringDist.dirac(1), ImmigrationDist.dirac(2))


@pytest.fixture
def geometric_spec():
    return ModelSpec(OffspringDist.geometric(1.0), ImmigrationDist.poisson(2.0))


@pytest.fixture
def stationary_spec():
    return ModelSpec(OffspringDist.bernoulli(0.5), ImmigrationDist.poisson(2.0))
