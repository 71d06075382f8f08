import pytest

from chronoqa.corpus import ingest
from chronoqa.pipeline import Pipeline
from chronoqa.tempex import TempexParser
from chronoqa.temporal import TimePoint

from pathlib import Path

FIXTURE_CORPUS = Path(__file__).resolve().parents[1] / "data" / "fixture_corpus"

REFERENCE_TIME = TimePoint(2023, 5, 1)

def pytest_configure(config):
    # one line per acceptance criterion, shown in the terminal summary
    config._acceptance_results = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_acceptance_results", [])
    if results:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance criteria:")
        for line in sorted(results):
            terminalreporter.write_line("  " + line)


@pytest.fixture(scope="session")
def acceptance_log(request):
    return request.config._acceptance_results


@pytest.fixture(scope="session")
def index():
    return ingest(FIXTURE_CORPUS)


@pytest.fixture(scope="session")
def pipeline(index):
    return Pipeline(index)


@pytest.fixture(scope="session")
def parser():
    return TempexParser()


@pytest.fixture
def ref():
    return REFERENCE_TIME
