"""All primary acceptance criteria at their stated tolerances.

Each criterion prints one PASS/FAIL line (also repeated in the terminal
summary).  The same code backs ``rydlink report``.
"""
import pytest

from rydlink import acceptance as acc

RESULTS = []


@pytest.mark.slow
@pytest.mark.parametrize("cid", sorted(acc.CRITERIA))
def test_criterion(cid):
    r = acc.run_criterion(cid)
    RESULTS.append(r.line())
    print(r.line())
    assert r.passed, r.line()
