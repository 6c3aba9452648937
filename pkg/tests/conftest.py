import numpy as np
import pytest

from ptwave.evans import EvansFunction
from ptwave.manifold import FamilyChart, homogenized_jacobians
from ptwave.oracle import ConstCoeffSystem
from ptwave.profile import generic_fixture, vdw_fixture


@pytest.fixture(scope="session")
def vdw():
    return vdw_fixture()


@pytest.fixture(scope="session")
def vdw_chart(vdw):
    return FamilyChart(*vdw)


@pytest.fixture(scope="session")
def vdw_H(vdw_chart):
    return homogenized_jacobians(vdw_chart)


@pytest.fixture(scope="session")
def vdw_evans(vdw):
    return EvansFunction(*vdw)


@pytest.fixture(scope="session")
def generic():
    return generic_fixture()


@pytest.fixture(scope="session")
def generic_H(generic):
    return homogenized_jacobians(FamilyChart(*generic))


@pytest.fixture(scope="session")
def generic_evans(generic):
    return EvansFunction(*generic)


@pytest.fixture(scope="session")
def oracle_system():
    """n = d = 2, A^1 = [[0, 1], [1, 0]], A^2 = diag(1, -1), Laplacian, X = 2 pi."""
    return ConstCoeffSystem(A=[[[0, 1], [1, 0]], [[1, 0], [0, -1]]], X=2 * np.pi)


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion(capsys):
    """Record and print the PASS/FAIL line of an acceptance criterion."""
    def record(k: int, ok: bool, detail: str):
        line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA[k] = line
        with capsys.disabled():
            print("\n" + line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[k])
