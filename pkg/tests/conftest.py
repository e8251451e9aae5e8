from pathlib import Path

import pytest

from imprecise_hitting.modelio import parse_model

DATA = Path(__file__).parent / "data"
FIXTURES = ("geo", "trap", "half", "ruin")


def load(name):
    return parse_model(DATA / f"fix-{name}.json")


@pytest.fixture
def geo():
    return load("geo")


@pytest.fixture
def trap():
    return load("trap")


@pytest.fixture
def half():
    return load("half")


@pytest.fixture
def ruin():
    return load("ruin")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[number])
