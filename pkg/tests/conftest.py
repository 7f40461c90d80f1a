import numpy as np
import pytest

from grushin.grushin1d import GrushinPotential, OperatorSpec
from grushin.numerics1d import DD, CompositePolicy, SymTridiagonal

# fine grid on which P_1 reproduces its exact spectrum {4, 8, 12, ...} to ~1e-5
P1_POLICY = CompositePolicy(h_min=1e-4, ratio=1.02, h_tail=1e-3)


@pytest.fixture(scope="session")
def p1_spec():
    return OperatorSpec(GrushinPotential(0.75, 1.0, 2.0), 20.0, DD, P1_POLICY)


@pytest.fixture(scope="session")
def p1_matrix(p1_spec):
    return p1_spec.matrix()


@pytest.fixture
def t2():
    """The matrix [[2, -1], [-1, 2]] with eigenvalues 1 and 3."""
    return SymTridiagonal(np.array([2.0, 2.0]), np.array([-1.0]))


# acceptance results, printed as one line per criterion after the run
_ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def acceptance_record():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
