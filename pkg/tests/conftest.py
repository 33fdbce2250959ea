from __future__ import annotations

from contextlib import contextmanager

import pytest

from incident_rag.evaluation.fixtures import AD_ENABLED_QUERIES, fixture_lines
from incident_rag.events import ingest_lines
from incident_rag.llm import load_registry
from incident_rag.query import load_library


@pytest.fixture(scope="session")
def malware_store():
    return ingest_lines(fixture_lines("malware-fakeauth", 0), "fake-authenticator")


@pytest.fixture(scope="session")
def ad_store():
    return ingest_lines(fixture_lines("ad-redteam", 0), "ad-redteam")


@pytest.fixture(scope="session")
def malware_library():
    return load_library("malware")


@pytest.fixture(scope="session")
def ad_library():
    return load_library("ad", only=AD_ENABLED_QUERIES)


@pytest.fixture(scope="session")
def registry():
    return load_registry()


@pytest.fixture()
def oracle(registry):
    return registry.create("oracle")


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture()
def criterion():
    """Context manager that records one PASS/FAIL line per acceptance criterion."""

    @contextmanager
    def check(number: int, title: str):
        try:
            yield
        except BaseException:
            line = f"FAIL criterion {number:>2}: {title}"
            print(line)
            ACCEPTANCE_LINES.append(line)
            raise
        line = f"PASS criterion {number:>2}: {title}"
        print(line)
        ACCEPTANCE_LINES.append(line)

    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
