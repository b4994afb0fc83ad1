import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

SAMPLE = """PROGRAM: Tucker Carlson Tonight
NETWORK: FOX
DATE: 2020-04-15

TUCKER CARLSON: Good evening. Welcome to the show.
GUEST: Thanks, Tucker.
"""

SAMPLE_CORPUS = Path(__file__).resolve().parents[1] / "src" / "newsbias" / "data" / "sample_corpus"

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion covered by a test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    number, text = getattr(report, "criterion", (None, None))
    if number is None:
        return
    ok = _criteria.get(number, (text, True))[1] and report.passed
    _criteria[number] = (text, ok)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        text, ok = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {text}")


@pytest.fixture
def sample_text():
    return SAMPLE
