import pytest
from hypothesis import settings

from pmufdi.grid import build_jacobian, load_case
from pmufdi.synth import TrajectoryConfig, measure, simulate_trajectory

# fixed example streams keep test_output.txt reproducible
settings.register_profile("repro", derandomize=True)
settings.load_profile("repro")


@pytest.fixture(scope="session")
def case4():
    return load_case("case4.grid")


@pytest.fixture(scope="session")
def case6():
    return load_case("case6.grid")


@pytest.fixture(scope="session")
def rts24():
    return load_case("rts24.grid")


@pytest.fixture(scope="session")
def jac4(case4):
    return build_jacobian(case4)


@pytest.fixture(scope="session")
def jac6(case6):
    return build_jacobian(case6)


@pytest.fixture(scope="session")
def jac24(rts24):
    return build_jacobian(rts24)


@pytest.fixture(scope="session")
def rts24_data(rts24, jac24):
    traj = simulate_trajectory(rts24, TrajectoryConfig(seed=0))
    return traj, measure(traj.X, jac24)


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
