"""Acceptance gate: every correctness criterion at its pinned tolerance.

Each test prints one PASS/FAIL line (run pytest with -s or check the captured
output).  The criteria share a session context so the stationarity runs feed
the convergence diagnostics instead of being repeated.
"""

import pytest

from frcom.validation import CRITERIA

_CTX = {}
_BY_NAME = dict(CRITERIA)


@pytest.mark.parametrize("name", [name for name, _ in CRITERIA])
def test_criterion(name):
    result = _BY_NAME[name](_CTX)
    print(result.line())
    assert result.passed, result.line()
