import numpy as np
import pytest

from lrswaption.american import SolverConfig, solve_boundary
from lrswaption.model import reference_params, reference_swap
from lrswaption.payoff import build_payoff_table

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def params():
    return reference_params(0.5)


@pytest.fixture(scope="session")
def payer_table(params):
    return build_payoff_table(params, reference_swap("payer"))


@pytest.fixture(scope="session")
def receiver_table(params):
    return build_payoff_table(params, reference_swap("receiver"))


@pytest.fixture(scope="session")
def payer_boundary(payer_table):
    return solve_boundary(payer_table, SolverConfig(n_steps=100))


@pytest.fixture(scope="session")
def receiver_boundary(receiver_table):
    return solve_boundary(receiver_table, SolverConfig(n_steps=100))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
