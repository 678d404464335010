"""Acceptance criteria A1 to A10, one pass/fail line each (run with -s to see them)."""
import pytest

from shearlab.checks import CHECKS, run_check


@pytest.mark.slow
@pytest.mark.parametrize("name", list(CHECKS))
def test_acceptance(name):
    result = run_check(name, threads=2, seed=0)
    print(result.line())
    assert result.passed, result.details
