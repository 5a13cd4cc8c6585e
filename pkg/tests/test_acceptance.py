"""The ten acceptance criteria at their stated tolerances.

Each criterion prints one PASS/FAIL line; the lines are also repeated in the
terminal summary (see conftest.py) so they survive output capturing.
"""
import pytest

from cofat import acceptance

FAST = {2, 4, 5, 6, 8, 10}
LINES: list[str] = []

PARAMS = [pytest.param(k, id=f"criterion_{k}", marks=() if k in FAST else (pytest.mark.slow,))
          for k in sorted(acceptance.CRITERIA)]


@pytest.mark.parametrize("number", PARAMS)
def test_criterion(number):
    result = acceptance.CRITERIA[number]()
    line = f"{result.line()} ({result.seconds:.1f} s)"
    LINES.append(line)
    print(line)
    assert result.number == number
    assert result.passed, result.details
