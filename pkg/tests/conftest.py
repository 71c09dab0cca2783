from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).parent / "data"

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def record(number, title, passed, detail):
    ACCEPTANCE[number] = (title, bool(passed), detail)
    print(_line(number))


def _line(number):
    title, passed, detail = ACCEPTANCE[number]
    return f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(_line(number))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def data_dir():
    return DATA
