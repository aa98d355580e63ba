import numpy as np
import pytest

from meanco.geometry import DomainSpec, build_mesh

ACCEPTANCE_RESULTS = {}


def record_acceptance(number, title, passed, detail):
    ACCEPTANCE_RESULTS[number] = (title, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        title, passed, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {n:2d}. {title}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def quad_coarse():
    return build_mesh(DomainSpec.quadrant_square(), 1.0)


@pytest.fixture(scope="session")
def quad_mesh():
    return build_mesh(DomainSpec.quadrant_square(), 0.25)


@pytest.fixture(scope="session")
def disk_mesh():
    return build_mesh(DomainSpec.disk_disk(0.5), 0.1)


@pytest.fixture(scope="session")
def sector_mesh():
    return build_mesh(DomainSpec.disk_sector(), 0.1)


@pytest.fixture(scope="session")
def strip_mesh():
    return build_mesh(DomainSpec.insulation_strip(), 0.1)
