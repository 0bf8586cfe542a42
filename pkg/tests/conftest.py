from __future__ import annotations

import pytest

from mlsn.flatten import flatten
from mlsn.synth import case_study_fixture, write_case_study


@pytest.fixture
def case_net():
    return case_study_fixture()


@pytest.fixture
def case_forum(case_net):
    return flatten(case_net, "forum")


@pytest.fixture
def case_dir(tmp_path):
    write_case_study(tmp_path / "case")
    return tmp_path / "case"


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, whatever the verbosity."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", "call") != "call" and outcome != "error":
                continue
            if "test_acceptance.py" in rep.nodeid and "::test_ac" in rep.nodeid:
                name = rep.nodeid.split("::")[-1]
                lines.append((name, "PASS" if outcome == "passed" else "FAIL"))
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for name, verdict in sorted(lines):
            terminalreporter.write_line(f"{verdict}  {name}")
