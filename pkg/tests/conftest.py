import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sigmahomog.cell import SolverParams, solve_all_correctors, solve_permeability_correctors
from sigmahomog.coeff import layered_coefficients, make_disk_geometry
from sigmahomog.grid import PeriodicGrid
from sigmahomog.tensor import assemble_K, assemble_q_direct, assemble_q_energy


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(1234))


@pytest.fixture(scope="session")
def layered_256():
    """``a(y1) = 2 + sin 2 pi y1`` with its correctors and both tensor assemblies at n=256."""
    A = layered_coefficients(1.0, 3.0).sample(PeriodicGrid(256))
    C = solve_all_correctors(A, SolverParams(cg_tol=1e-10))
    return A, C, assemble_q_direct(A, C), assemble_q_energy(A, C)


@pytest.fixture(scope="session")
def disk_128():
    G = make_disk_geometry(128, 0.25)
    P = solve_permeability_correctors(G, SolverParams(cg_tol=1e-10))
    return G, P, assemble_K(P)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
