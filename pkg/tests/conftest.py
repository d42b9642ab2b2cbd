import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from momo_lab.arith import build_arith_table  # noqa: E402


@pytest.fixture(scope="session")
def table_1e6():
    return build_arith_table(10**6 + 256)


@pytest.fixture(scope="session")
def table_1e7():
    return build_arith_table(10**7)


@pytest.fixture(scope="session")
def table_small():
    return build_arith_table(20_000)


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def record(number: int, ok: bool, detail: str):
        lines.append((number, "PASS" if ok else "FAIL", detail))
        assert ok, f"criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, detail in sorted(lines, key=lambda x: x[0]):
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {detail}")
