import numpy as np
import pytest

from matspec.forward import diagonalize_omega, forward_spectral_data
from matspec.ode import BoundaryProblem

ACCEPTANCE_LINES: list[str] = []

GRID = np.linspace(0, np.pi, 257)


def zero_problem(m=1, n_nodes=257):
    g = np.linspace(0, np.pi, n_nodes)
    Z = np.zeros((m, m))
    return BoundaryProblem(g, np.zeros((n_nodes, m, m)), Z, Z)


def constant_problem(diag, n_nodes=257):
    diag = np.asarray(diag, dtype=complex)
    m = diag.size
    g = np.linspace(0, np.pi, n_nodes)
    Q = np.broadcast_to(np.diag(diag), (n_nodes, m, m)).copy()
    Z = np.zeros((m, m))
    return BoundaryProblem(g, Q, Z, Z)


def offdiag_Q(x):
    s = 0.3 * np.sin(x)
    return np.array([[1.0, s], [s, 2.0]])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def cos_problem():
    return BoundaryProblem.from_function(lambda x: 0.5 * np.cos(x))


@pytest.fixture(scope="session")
def cos_data(cos_problem):
    return forward_spectral_data(cos_problem, 40)


@pytest.fixture(scope="session")
def offdiag_frame():
    """Original problem, the unitary ``U`` and the problem in the frame with diagonal omega."""
    p = BoundaryProblem.from_function(offdiag_Q)
    U, conj = diagonalize_omega(p)
    return p, U, conj


@pytest.fixture(scope="session")
def offdiag_data(offdiag_frame):
    return forward_spectral_data(offdiag_frame[2], 40)


@pytest.fixture(scope="session")
def diag12_data():
    return forward_spectral_data(constant_problem([1, 2]), 10)


@pytest.fixture(scope="session")
def shift2i_problem():
    return constant_problem([2j])


@pytest.fixture(scope="session")
def shift2i_data(shift2i_problem):
    return forward_spectral_data(shift2i_problem, 10)
