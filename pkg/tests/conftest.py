import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qwo.model import Dag, LigamModel

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

CHAIN_COV = np.array([[1.0, 1, 1], [1, 2, 2], [1, 2, 3]])


@pytest.fixture
def chain_model():
    """X0 -> X1 -> X2 with unit coefficients and unit noise."""
    B = np.zeros((3, 3))
    B[1, 0] = B[2, 1] = 1.0
    return LigamModel(B, np.ones(3))


@pytest.fixture
def chain():
    return Dag(3, [(0, 1), (1, 2)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""
    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[number] = line
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
