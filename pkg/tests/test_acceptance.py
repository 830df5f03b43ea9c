"""Acceptance criteria, each run at its stated tolerance.

One PASS/FAIL line per criterion is printed in the terminal summary.
"""
import pytest

from alcoint.acceptance import CRITERIA

RESULTS = {}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    result = CRITERIA[number]()
    RESULTS[number] = result
    print(result.line())
    assert result.passed, result.line()
