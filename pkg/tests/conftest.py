import numpy as np
import pytest

from pme_inverse import ForwardConfig, build_unit_square_mesh, solve_forward, solve_profile

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def run_gamma35():
    """gamma = 3.5, poly_bump(10), N = 10, dt = 0.1 up to T = 1000 with snapshots."""
    config = ForwardConfig(gamma=3.5, n=10, T=1000.0, dt=0.1, u0_spec="poly_bump(10)",
                           snapshot_times=(10.0, 100.0, 1000.0))
    return solve_forward(config)


@pytest.fixture(scope="session")
def run_gamma11():
    config = ForwardConfig(gamma=1.1, n=10, T=1000.0, dt=0.1, u0_spec="poly_bump(10)",
                           snapshot_times=(1.0, 100.0, 1000.0))
    return solve_forward(config)


@pytest.fixture(scope="session")
def mesh10():
    return build_unit_square_mesh(10)


@pytest.fixture(scope="session")
def profile2_n10(mesh10):
    return solve_profile(mesh10, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
