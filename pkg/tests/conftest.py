import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def central_diff(f, x, h):
    """First and second central differences of a scalar function of one variable."""
    fp, f0, fm = f(x + h), f(x), f(x - h)
    return (fp - fm) / (2 * h), (fp - 2 * f0 + fm) / (h * h)


# one PASS/FAIL line per acceptance criterion, shown in the terminal summary
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
