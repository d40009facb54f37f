"""The twelve acceptance criteria at their stated tolerances.

Each test prints one PASS/FAIL line; the lines are repeated in the terminal
summary.  Criteria 1, 2, 6, 7 and 9 are known to fail for the reasons
recorded alongside the project notes; they run unmodified.
"""
import pytest

from blinstab import acceptance
from blinstab.config import RunConfig

import conftest


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number):
    res = acceptance.CRITERIA[number](RunConfig(workers=4))
    line = res.line()
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)
    assert res.passed, line
