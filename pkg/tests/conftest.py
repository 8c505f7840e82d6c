import os

import pytest

FULL = os.environ.get("ARTIFACT_FULL") == "1"

# criterion id -> (status, detail), filled in by test_acceptance.py
ACCEPTANCE = {}


def pytest_collection_modifyitems(config, items):
    if FULL:
        return
    skip = pytest.mark.skip(reason="full-scale run; set ARTIFACT_FULL=1")
    for item in items:
        if "full" in item.keywords:
            item.add_marker(skip)
            if item.name.startswith("test_criterion_"):
                num = item.name.split("_")[2]
                ACCEPTANCE[f"{num}-full"] = ("SKIP", "full-scale run not requested (set ARTIFACT_FULL=1)")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split("-")[0]), k)):
        status, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{status}  criterion {key}: {detail}")


@pytest.fixture
def record():
    """record(criterion, passed, detail) stores one summary line."""

    def _record(key, passed, detail):
        ACCEPTANCE[str(key)] = ("PASS" if passed else "FAIL", detail)
        print(f"{'PASS' if passed else 'FAIL'}  criterion {key}: {detail}")

    return _record
