import os

import pytest

os.environ.setdefault("OCE_THREADS", "1")

_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Record ``measured`` vs ``required`` for an acceptance criterion line."""

    def record(number, text):
        _CRITERIA.setdefault(number, {"details": []})["details"].append(text)

    return record


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    marker = "test_acceptance.py::test_criterion_"
    if marker not in report.nodeid:
        return
    number = int(report.nodeid.split(marker, 1)[1].split("_", 1)[0])
    entry = _CRITERIA.setdefault(number, {"details": []})
    entry["passed"] = entry.get("passed", True) and report.passed


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        status = "PASS" if entry.get("passed") else "FAIL"
        detail = "; ".join(entry["details"]) or "no measurement recorded"
        terminalreporter.write_line(f"criterion {number}: {status}  {detail}")
