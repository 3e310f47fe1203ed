import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fogclnc.config import ScenarioConfig
from fogclnc.content import CacheMatrix, SideInfo

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def cfg():
    return ScenarioConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_side(has, wants, num_files):
    return SideInfo(tuple(frozenset(h) for h in has), tuple(wants), num_files)


def make_cache(placement, num_faps):
    return CacheMatrix(np.asarray(placement, dtype=bool), num_faps)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one acceptance verdict line; the lines are repeated in the terminal summary."""

    def emit(criterion: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
