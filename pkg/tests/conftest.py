import os
import sys

import numpy as np
import pytest

_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(_ROOT, "src"))

import paroc  # noqa: E402


@pytest.fixture(scope="session")
def lq1():
    return paroc.get_problem("lq1")


@pytest.fixture(scope="session")
def example31():
    return paroc.get_problem("example31")


@pytest.fixture(scope="session")
def smartgrid():
    return paroc.get_problem("smartgrid")


@pytest.fixture(scope="session")
def lq1_solution(lq1):
    """lq1 solved tightly on the reference grid (shared across tests)."""
    grid = paroc.Grid(1000)
    res = paroc.solve_scalarized(lq1, np.ones(1), None, grid,
                                 paroc.SolveOptions(grad_tol=1e-7))
    assert res.converged
    return res


@pytest.fixture(scope="session")
def example31_traj(example31):
    """Zero-control example31 trajectory on the reference grid."""
    grid = paroc.Grid(1000)
    return paroc.integrate_state(example31, np.zeros((1000, 3)), grid)


@pytest.fixture(scope="session")
def smartgrid_interior_traj(smartgrid):
    """A strictly interior constant-control smartgrid trajectory."""
    grid = paroc.Grid(500)
    return paroc.integrate_state(smartgrid, np.full((500, 3), 0.5), grid)
