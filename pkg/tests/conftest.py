from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

RECIPES = ("gyudon", "salad", "scrambled_eggs", "stir_fry", "potato_soup")

_criteria: dict[str, tuple[int, str]] = {}
_outcomes: dict[str, str] = {}


def recipe_dir(name: str) -> Path:
    return Path(str(resources.files("foonplan.data") / "recipes" / name))


@pytest.fixture
def gyudon_dir() -> Path:
    return recipe_dir("gyudon")


def pytest_configure(config: pytest.Config) -> None:
    config.addinivalue_line(
        "markers", "criterion(number, title): acceptance criterion checked by this test"
    )


def pytest_collection_modifyitems(items: list[pytest.Item]) -> None:
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _criteria[item.nodeid] = (mark.args[0], mark.args[1])


def pytest_runtest_logreport(report: pytest.TestReport) -> None:
    if report.nodeid not in _criteria:
        return
    if report.failed:
        _outcomes[report.nodeid] = "FAIL"
    elif report.when == "call" and report.nodeid not in _outcomes:
        _outcomes[report.nodeid] = "PASS" if report.passed else "SKIP"


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, (number, title) in sorted(_criteria.items(), key=lambda kv: kv[1][0]):
        outcome = _outcomes.get(nodeid, "NOT RUN")
        terminalreporter.write_line(f"criterion {number}: {outcome}  {title}")
