import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gplab.fock import FockBasis
from gplab.lattice import build_lattice
from gplab.scattering import PotentialSpec

settings.register_profile("gplab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("gplab")


@pytest.fixture(scope="session")
def lat1():
    return build_lattice(1)


@pytest.fixture(scope="session")
def ball():
    return PotentialSpec()


@pytest.fixture(scope="session")
def exc3(lat1):
    """Excitation space, N = 3, sector 0 (dimension 58)."""
    return FockBasis(lat1, 3, sector=(0, 0, 0))


@pytest.fixture(scope="session")
def can3(lat1):
    return FockBasis(lat1, 3, include_zero_mode=True, sector=(0, 0, 0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion and print it."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"CRITERION {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
