import warnings

import pytest

from gfkit.grid import Grid
from gfkit.kernel import Kernel
from gfkit.steady import steady_explicit_uniform, steady_numeric


@pytest.fixture(scope="session")
def desk_grid():
    return Grid(20.0, 4000)


@pytest.fixture(scope="session")
def small_grid():
    return Grid(20.0, 800)


@pytest.fixture(scope="session")
def explicit_N(desk_grid):
    return steady_explicit_uniform(1.0, desk_grid)


@pytest.fixture(scope="session")
def mitosis_N(desk_grid):
    return steady_numeric(Kernel.equal_mitosis(), 1.0, desk_grid)


@pytest.fixture(scope="session")
def steady_small():
    """Numerical steady states for the four kernels on the small grid."""
    grid = Grid(20.0, 800)
    out = {}
    for kernel in (
        Kernel.uniform(),
        Kernel.equal_mitosis(),
        Kernel.general_mitosis(0.3),
        Kernel.homogeneous(1.0),
    ):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            out[kernel] = steady_numeric(kernel, 1.0, grid)
    return out


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
