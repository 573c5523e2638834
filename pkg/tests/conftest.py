import numpy as np
import pytest

from hardy_lab.field import Grid, generate_test_function
from hardy_lab.geometry import GeometryConfig

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[criterion] = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def cfg48():
    return GeometryConfig(a=1.0, b=1.0, N=4, delta=0.5)


@pytest.fixture
def field64(cfg48):
    return generate_test_function(3, Grid.for_config(cfg48, 64, 64), cfg48)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
