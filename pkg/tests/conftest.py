"""Shared fixtures and the acceptance summary.

Tests marked ``@pytest.mark.criterion(k, "title")`` are reported in a
closing summary with one PASS/FAIL line per criterion.  A test may attach
measured values to its line through the ``criterion_note`` fixture.
"""

from __future__ import annotations

import pytest

_RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def _marker(item):
    m = item.get_closest_marker("criterion")
    return None if m is None else (int(m.args[0]), str(m.args[1]))


@pytest.fixture
def criterion_note(request):
    info = _marker(request.node)
    notes = _RESULTS[info[0]]["notes"] if info else []
    return notes.append


def pytest_runtest_logreport(report):
    # setup failures count too; teardown is ignored unless it fails
    if report.when == "call" or report.failed or report.skipped:
        for entry in _RESULTS.values():
            if report.nodeid in entry.get("ids", ()):
                entry["outcomes"].append(report.outcome)


def pytest_itemcollected(item):
    info = _marker(item)
    if info is not None:
        _RESULTS.setdefault(info[0], {"title": info[1], "outcomes": [], "notes": []})
        _RESULTS[info[0]].setdefault("ids", set()).add(item.nodeid)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(_RESULTS):
        entry = _RESULTS[k]
        outcomes = entry["outcomes"]
        if not outcomes:
            status = "NOT RUN"
        elif all(o == "passed" for o in outcomes):
            status = "PASS"
        elif any(o == "failed" for o in outcomes):
            status = "FAIL"
        else:
            status = "SKIP"
        notes = "; ".join(entry["notes"])
        tr.write_line(f"criterion {k:2d} {status:4s}  {entry['title']}" + (f"  [{notes}]" if notes else ""))
