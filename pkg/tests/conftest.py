import numpy as np
import pytest

from selfsim.classify import get_entry, load_registry

REGISTRY_NAMES = [e.name for e in load_registry()]


@pytest.fixture(scope="session")
def entries():
    return {e.name: e for e in load_registry()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def system(name):
    return get_entry(name).system


def witness(name):
    return get_entry(name).witness


# acceptance outcomes, filled by test_acceptance.py and printed after the run
ACCEPTANCE = {}


def record_criterion(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})"
    ACCEPTANCE[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
