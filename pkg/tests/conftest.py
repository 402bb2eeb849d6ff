import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from overdet.radial_ode import ProblemParams, build_profile, integrate_ivp  # noqa: E402
from overdet.sturm_liouville import compute_datum  # noqa: E402


@pytest.fixture(scope="session")
def sol33():
    return integrate_ivp(ProblemParams(3, 3.0))


@pytest.fixture(scope="session")
def sol_linear():
    return integrate_ivp(ProblemParams(3, 2.0, oracle_mode=True))


@pytest.fixture(scope="session")
def profile1(sol33):
    return build_profile(sol33, 1)


@pytest.fixture(scope="session")
def profile2(sol33):
    return build_profile(sol33, 2)


@pytest.fixture(scope="session")
def datum1(profile1):
    return compute_datum(profile1)


@pytest.fixture(scope="session")
def datum2(profile2):
    return compute_datum(profile2)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
