import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

_CRITERIA = []


@pytest.fixture
def report():
    """Record one acceptance line: ``report(number, passed, detail)``."""

    def _record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} -- {detail}"
        _CRITERIA.append((number, line))
        print(line)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_CRITERIA, key=lambda item: str(item[0])):
        terminalreporter.write_line(line)
