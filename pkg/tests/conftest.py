import numpy as np
import pytest

import casched
from casched import Policy, load_scenario, run_simulation

_ACCEPTANCE_LINES = []


def record_criterion(name, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}"
    _ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def scenario():
    return load_scenario(casched.bundled())


@pytest.fixture(scope="session")
def upf_result(scenario):
    return run_simulation(scenario, Policy.UPF)


@pytest.fixture(scope="session")
def compare_results(scenario, upf_result):
    return {
        Policy.UPF: upf_result,
        Policy.PF_WEIGHTED: run_simulation(scenario, Policy.PF_WEIGHTED, certify=False),
        Policy.PF: run_simulation(scenario, Policy.PF, certify=False),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
