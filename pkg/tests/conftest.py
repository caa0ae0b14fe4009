import pathlib

import pytest
from hypothesis import settings

from minrepfair.data import ADULT_RACE_SCHEMA, ADULT_SEX_SCHEMA, IRIS_SCHEMA, load_dataset

settings.register_profile("repo", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("repo")

DATA = pathlib.Path(__file__).resolve().parents[1] / "data"

_CRITERIA = []


@pytest.fixture(scope="session")
def iris():
    return load_dataset(DATA / "iris.csv", IRIS_SCHEMA)


@pytest.fixture(scope="session")
def adult_race():
    return load_dataset(DATA / "adult.csv.gz", ADULT_RACE_SCHEMA)


@pytest.fixture(scope="session")
def adult_sex():
    return load_dataset(DATA / "adult.csv.gz", ADULT_SEX_SCHEMA)


@pytest.fixture
def report_criterion():
    """Record a one-line acceptance verdict, echoed in the terminal summary."""
    def record(number, passed, detail, flag=False):
        verdict = "FLAG" if flag else ("PASS" if passed else "FAIL")
        line = f"criterion {number:>2}: {verdict}  {detail}"
        _CRITERIA.append((number, line))
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_CRITERIA):
            terminalreporter.write_line(line)

