import json
from pathlib import Path

import pytest

from ilkit.io import load_model

FIXTURES = Path(__file__).parent / "fixtures"

CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def fixture_path():
    return lambda name: FIXTURES / name


@pytest.fixture(scope="session")
def fig1():
    return load_model(FIXTURES / "fig1.json")


@pytest.fixture(scope="session")
def four_worlds():
    return load_model(FIXTURES / "four_worlds.json")


@pytest.fixture
def load_json():
    return lambda name: json.loads((FIXTURES / name).read_text())


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(RESULTS):
        ok, line = RESULTS[num]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {num}: {line}")
