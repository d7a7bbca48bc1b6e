import numpy as np
import pytest
from hypothesis import settings

from chsim.dynamics import InitSpec, initial_data
from chsim.spectral_core import Grid1D

settings.register_profile("chsim", deadline=None, max_examples=25)
settings.load_profile("chsim")


def band_limited(grid: Grid1D, rng: np.random.Generator, max_mode: int = 24) -> np.ndarray:
    """Random real trigonometric polynomial with modes ``|j| <= max_mode``."""
    x = grid.x + grid.half_length
    k = np.pi / grid.half_length
    j = np.arange(1, max_mode + 1)
    a, b = rng.normal(size=max_mode), rng.normal(size=max_mode)
    ph = np.outer(x, j * k)
    return rng.normal() + np.cos(ph) @ a + np.sin(ph) @ b


def gaussian_pair(kind="A", n=1024, L=20.0):
    grid = Grid1D(n, L)
    return initial_data(kind, grid, InitSpec.single("gaussian", 1.0, -0.5, 1.0),
                        InitSpec.single("gaussian", 1.0, 0.5, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid1024():
    return Grid1D(1024, 20.0)


# criterion number -> (passed, detail), filled by test_acceptance and echoed after the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
