import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from n3lars import generate_synthetic, standardize  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def synth_small():
    """The scaled-down synthetic problem: n=500, 50 base + 50 redundant features."""
    return standardize(generate_synthetic(500, 50, 50, 0.1, seed=7))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
