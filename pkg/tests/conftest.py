"""Shared fixtures and the acceptance summary hook.

The fixtures rebuild the bundled reference study from scratch for every
test: construction is milliseconds, and fresh state keeps mutation tests
honest. The terminal-summary hook prints one PASS/FAIL line per behavior
labeled with the ``acceptance`` marker so the headline guarantees are
readable at a glance after a full run.
"""

from __future__ import annotations

from collections import OrderedDict

import pytest

from spada import dfci
from spada.catalog import (
    DetailLevel,
    PrivacyProperty,
    SourceDocument,
    SourceKind,
    ThreatAgent,
    VariableSetup,
    new_catalog,
)
from spada.oplog import Study

# ---------------------------------------------------------------------------
# reference study fixtures


@pytest.fixture
def base_catalog():
    """The reference study as collected: 46 threats, 20 candidate assets."""
    return dfci.build_base_catalog()


@pytest.fixture
def study_step1() -> Study:
    """Reference study after threat refinement (discards, merges, derivations)."""
    return dfci.build_study(through_step=1)


@pytest.fixture
def study_step2() -> Study:
    """Reference study after asset grouping."""
    return dfci.build_study(through_step=2)


@pytest.fixture
def full_study() -> Study:
    """Reference study after the full combination pass (298 threats total)."""
    return dfci.build_study(through_step=3)


@pytest.fixture
def workspace_dir(tmp_path):
    """An on-disk workspace holding the reference study files."""
    return dfci.build_workspace(tmp_path / "ws")


# ---------------------------------------------------------------------------
# small synthetic studies


def make_tiny_setup(domain: str | None = "Test Domain") -> VariableSetup:
    return VariableSetup(
        sources=["src"],
        properties=frozenset(PrivacyProperty),
        domain=domain,
        detail=DetailLevel.ABSTRACT,
        agents=frozenset(ThreatAgent),
    )


def make_tiny_catalog(domain: str | None = "Test Domain"):
    """One-source catalog for small hand-built scenarios."""
    return new_catalog(
        make_tiny_setup(domain),
        [SourceDocument("src", "Src", "Synthetic source", SourceKind.REPORT)],
    )


@pytest.fixture
def tiny_catalog():
    return make_tiny_catalog()


@pytest.fixture
def tiny_study(tiny_catalog) -> Study:
    return Study(tiny_catalog)


# ---------------------------------------------------------------------------
# acceptance summary

_acceptance_results: "OrderedDict[str, dict]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(label): groups the test under one PASS/FAIL line in the "
        "acceptance summary printed after the run",
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    label = marker.args[0]
    entry = _acceptance_results.setdefault(label, {"ran": False, "failed": False})
    if report.when == "call":
        entry["ran"] = True
        if report.failed:
            entry["failed"] = True
    elif report.failed:
        # A setup/teardown error also sinks the behavior.
        entry["ran"] = True
        entry["failed"] = True


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("=", "acceptance summary")
    for label, entry in _acceptance_results.items():
        verdict = "PASS" if entry["ran"] and not entry["failed"] else "FAIL"
        terminalreporter.write_line(f"{verdict}  {label}")
