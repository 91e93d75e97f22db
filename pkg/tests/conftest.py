from pathlib import Path

import pytest

from cpgrules.embeddings import load_embeddings
from cpgrules.files import read_corpus
from cpgrules.textprep import _data_path

from oracles import CRITERION_DETAILS

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def synthetic_corpus():
    return read_corpus(_data_path("synthetic_corpus.jsonl"))


@pytest.fixture(scope="session")
def synthetic_table():
    return load_embeddings(_data_path("synthetic_vectors.txt"))


def data_file(name: str) -> Path:
    return _data_path(name)


# ---------------------------------------------------------------- acceptance report

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    outcome = "PASS" if call.excinfo is None else "FAIL"
    prev = _CRITERIA.get(number)
    if prev is None or prev[1] == "PASS":
        _CRITERIA[number] = (title, outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcome = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {outcome}  {title}")
        if number in CRITERION_DETAILS:
            terminalreporter.write_line(f"    measured: {CRITERION_DETAILS[number]}")
