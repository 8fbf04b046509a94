import numpy as np
import pytest

from ramanem.grid import ForwardModelConfig, build_grid


def dense_forward(grid):
    """Independent dense H built entry by entry from the quadrature rule."""
    n = grid.n
    H = np.zeros((n, n))
    for i in range(n):
        H[i, 0] = grid.z_min
        for j in range(1, i + 1):
            H[i, j] = grid.dz
        if grid.quadrature == "trapezoid" and i >= 1:
            H[i, 0] += 0.5 * grid.dz
            H[i, i] -= 0.5 * grid.dz
    return H


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def comb_grid():
    return build_grid(15, 15000, 15)


@pytest.fixture
def fwd():
    return ForwardModelConfig(C=1e-20, wavelength=387.0)


# acceptance criteria record their verdict here; printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
