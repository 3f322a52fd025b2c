import math

import numpy as np
import pytest

from kghsim.spectral import GridSpec

ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running numerical sweeps")


@pytest.fixture
def grid32():
    return GridSpec(32, 2 * math.pi, 2.5)


@pytest.fixture
def grid16():
    return GridSpec(16, 2 * math.pi, 2.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def record_criterion():
    def record(number, title, passed, detail):
        ACCEPTANCE[number] = (title, bool(passed), detail)
        print(f"criterion {number:2d} [{'PASS' if passed else 'FAIL'}] {title}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(
            f"criterion {number:2d} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
        )
