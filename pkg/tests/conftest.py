import contextlib

import pytest
from hypothesis import settings

from daebl.machine import exynos5422

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile("ci")

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
CRITERIA: dict[int, tuple[bool, str]] = {}


@contextlib.contextmanager
def criterion(number: int, detail: str = ""):
    """Record PASS/FAIL for an acceptance criterion around a test body."""
    box = {"detail": detail}
    try:
        yield box
    except BaseException:
        CRITERIA[number] = (False, box["detail"])
        raise
    CRITERIA[number] = (True, box["detail"])


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def machine():
    return exynos5422()
