from __future__ import annotations

import pytest

from helpers import LISTING
from seesaw.tree import parse_tree

_ACCEPTANCE: list[str] = []


@pytest.fixture
def listing() -> str:
    return LISTING


@pytest.fixture
def ecommerce():
    return parse_tree(LISTING)


@pytest.fixture
def criterion(request):
    """Record a PASS/FAIL line for an acceptance criterion."""
    label = request.node.get_closest_marker("criterion").args[0]
    yield label
    rep = getattr(request.node, "rep_call", None)
    ok = rep is not None and rep.passed
    _ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'}  {label}  ({request.node.name})")


@pytest.hookimpl(hookwrapper=True, tryfirst=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion this test checks")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
