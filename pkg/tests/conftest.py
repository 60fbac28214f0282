import functools
import math

import pytest

from minannuli.asymptotics import normalization
from minannuli.solver import SolveTarget, solve

TWO_PI = 2 * math.pi


@functools.lru_cache(maxsize=None)
def solved(a: float, b: float, branch: int = 1):
    return solve(SolveTarget(a, b), branch=branch)


@functools.lru_cache(maxsize=None)
def solved_norm(a: float, b: float):
    return normalization(solved(a, b).family)


@pytest.fixture(scope="session")
def fam_1_0():
    return solved(1.0, 0.0).family


@pytest.fixture(scope="session")
def fam_1_2pi():
    return solved(1.0, TWO_PI).family


@pytest.fixture(scope="session")
def fam_0_2pi():
    return solved(0.0, TWO_PI).family


@pytest.fixture(scope="session")
def fam_4pi2_0():
    return solved(4 * math.pi ** 2, 0.0).family


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
