import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rydberg_arp.forster import build_catalog  # noqa: E402


@pytest.fixture(scope="session")
def catalog():
    return build_catalog()


def pytest_terminal_summary(terminalreporter):
    from _verdicts import LINES

    if LINES:
        terminalreporter.section("acceptance")
        for line in sorted(LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
