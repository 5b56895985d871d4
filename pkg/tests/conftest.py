import math

import numpy as np
import pytest

from wsav.grid import Grid, RealField, make_operators
from wsav.potential import PotentialParams

TWO_PI = 2 * math.pi


def smooth_field(grid: Grid, rng: np.random.Generator, amplitude: float = 0.5, kmax: int = 3) -> RealField:
    """Random trigonometric polynomial with modes up to ``kmax`` per axis."""
    coords = grid.coords()
    scale = [TWO_PI / L for L in grid.length]
    vals = np.zeros(grid.shape)
    for _ in range(6):
        k = rng.integers(-kmax, kmax + 1, size=grid.dim)
        phase = rng.uniform(0, TWO_PI)
        arg = sum(kk * s * (x - lo) for kk, s, x, lo in zip(k, scale, coords, grid.lo))
        vals += rng.normal() * np.cos(arg + phase)
    vals *= amplitude / max(1e-12, np.max(np.abs(vals)))
    return RealField(grid, vals)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid16():
    return Grid.uniform(16, 0.0, TWO_PI)


@pytest.fixture
def sine_ops():
    grid = Grid.uniform(32, 0.0, TWO_PI)
    return make_operators(grid, 1.0, 0.1, 4.0)


@pytest.fixture
def pp0():
    return PotentialParams(gamma=0.0, delta=5.0, C=1.0)


# one line per acceptance criterion, echoed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
