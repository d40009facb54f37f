import numpy as np
import pytest

from blinstab.grid import GridSpec
from blinstab.profiles import erf_profile, exponential_profile
from blinstab.stability import leading_eigenvalue

REF_NU = 1e-8
REF_ALPHA = 0.143

# Acceptance lines collected by tests/test_acceptance.py, echoed after the run.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def exp_profile():
    return exponential_profile()


@pytest.fixture(scope="session")
def erf_prof():
    return erf_profile()


@pytest.fixture(scope="session")
def ref_mode(erf_prof):
    """Unstable erf-profile mode near the most unstable wavenumber at nu = 1e-8."""
    return leading_eigenvalue(erf_prof, REF_ALPHA, REF_NU, GridSpec(N=150))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
