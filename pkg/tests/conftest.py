import numpy as np
import pytest

from fracdn import Conductivity, assemble_operator, build_grid, build_regions, spectral_decompose


def bump_sigma(grid, regions, amp=0.3, center=-0.15, width=0.1):
    sig = np.ones(grid.n_nodes)
    io = regions.idx_omega
    x = grid.coords[io, 0]
    sig[io] = 1.0 + amp * np.exp(-(((x - center) / width) ** 2))
    return sig


def operator_for(grid, regions, sig, lam=0.1):
    return spectral_decompose(assemble_operator(grid, Conductivity(sig, lam), regions), grid)


@pytest.fixture(scope="session")
def line63():
    """1D, M = 63, conductivity bump on the region."""
    grid = build_grid(1, 1.0, 63)
    regions = build_regions(grid, [-0.4, 0.0], [0.4, 0.7])
    sig = bump_sigma(grid, regions, center=-0.2)
    return grid, regions, sig, operator_for(grid, regions, sig)


@pytest.fixture(scope="session")
def line31():
    """The default inversion geometry."""
    grid = build_grid(1, 1.0, 31)
    regions = build_regions(grid, [-0.25, -0.05], [0.05, 0.8])
    sig = bump_sigma(grid, regions)
    return grid, regions, sig, operator_for(grid, regions, sig)


@pytest.fixture(scope="session")
def gauge31():
    grid = build_grid(1, 1.0, 31)
    regions = build_regions(grid, [-0.55, -0.05], [0.05, 0.9])
    sig = bump_sigma(grid, regions, center=-0.3)
    return grid, regions, sig, operator_for(grid, regions, sig)


@pytest.fixture(scope="session")
def plane16():
    grid = build_grid(2, 1.0, 16)
    regions = build_regions(grid, [[-0.6, -0.05], [-0.4, 0.4]], [[0.3, 0.8], [-0.5, 0.5]])
    sig = np.ones(grid.n_nodes)
    io = regions.idx_omega
    sig[io] = 1.0 + 0.2 * np.exp(-np.sum((grid.coords[io] - [-0.3, 0.0]) ** 2, axis=1) / 0.04)
    return grid, regions, sig, operator_for(grid, regions, sig)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for k in sorted(verdicts):
            terminalreporter.write_line(verdicts[k])
