import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"

# one line per acceptance criterion, shown in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_collection_modifyitems(config, items):
    if os.environ.get("XI_FULLSCALE", "") not in ("", "0"):
        return
    skip = pytest.mark.skip(reason="set XI_FULLSCALE=1 to run full-scale experiments")
    for item in items:
        if "fullscale" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_prob(rng: np.random.Generator, nx: int, ny: int, zeros: bool = True) -> np.ndarray:
    """Random joint table with a non-degenerate Y marginal."""
    while True:
        w = rng.random((nx, ny))
        if zeros:
            w[rng.random((nx, ny)) < 0.25] = 0.0
        if np.count_nonzero(w.sum(axis=0)) >= 2:
            return w / w.sum()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
