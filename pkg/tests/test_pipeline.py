"""Step orchestration: per-step flows, matrix handling, end-to-end equivalence."""

from __future__ import annotations

import pytest

from spada import dfci
from spada.catalog import DependencyClass
from spada.errors import DomainIndependentMode, SpadaError
from spada.oplog import Ledger, StepTag, Study, replay, stage_counts
from spada.pipeline import (
    ALL_ASSETS,
    FlowRecord,
    format_matrix_csv,
    parse_matrix_csv,
    run_all,
    run_step1,
    run_step2,
    run_step3,
)
from tests.conftest import make_tiny_catalog

DI = DependencyClass.DOMAIN_INDEPENDENT
DD = DependencyClass.DOMAIN_DEPENDENT


# -- FlowRecord --------------------------------------------------------------------


def test_flow_record_round_trips_through_dict():
    flow = FlowRecord(StepTag.STEP1, [("collected", 2), ("discarded", 1)], notes="n")
    assert FlowRecord.from_dict(flow.to_dict()) == flow
    assert flow.counts() == {"collected": 2, "discarded": 1}


def test_flow_record_rejects_duplicate_labels_and_negative_counts():
    with pytest.raises(SpadaError):
        FlowRecord(StepTag.STEP1, [("a", 1), ("a", 2)])
    with pytest.raises(SpadaError):
        FlowRecord(StepTag.STEP1, [("a", -1)])


# -- Step 1 ------------------------------------------------------------------------


def test_step1_flow_on_an_empty_catalog_is_all_zero(tiny_catalog):
    _, flow = run_step1(tiny_catalog, Ledger())
    assert flow.counts() == {
        "collected": 0,
        "discarded": 0,
        "after_embrace": 0,
        "derived_pre": 0,
        "derived_post": 0,
        "di_final": 0,
        "dd_retained": 0,
    }


def test_step1_flow_counts_a_minimal_scenario(tiny_catalog):
    tiny_catalog.add_threat("Kept threat", ["src"], DI)
    doomed = tiny_catalog.add_threat("Doomed threat", ["src"], DI)
    study = Study(tiny_catalog)
    study.record_discard(doomed.id, "out of scope")
    _, flow = run_step1(study.base, study.ledger)
    assert flow.counts() == {
        "collected": 2,
        "discarded": 1,
        "after_embrace": 1,
        "derived_pre": 0,
        "derived_post": 0,
        "di_final": 1,
        "dd_retained": 0,
    }


def test_step1_after_embrace_counts_merged_pools(tiny_catalog):
    for name in ("redundant alpha", "redundant beta", "redundant gamma", "standalone"):
        tiny_catalog.add_threat(name, ["src"], DI)
    study = Study(tiny_catalog)
    members = [t.id for t in study.catalog.active_threats() if "redundant" in t.description]
    study.record_embrace(members, "redundant family")
    _, flow = run_step1(study.base, study.ledger)
    counts = flow.counts()
    assert counts["collected"] == 4
    assert counts["after_embrace"] == 2  # 3 -> 1, plus the standalone


def test_step1_reference_flow(study_step1):
    _, flow = run_step1(study_step1.base, study_step1.ledger)
    assert flow.counts() == dfci.EXPECTED_FLOW_STAGES["Step1"]


def test_step1_ignores_later_step_records(full_study):
    _, flow = run_step1(full_study.base, full_study.ledger)
    assert flow.counts() == dfci.EXPECTED_FLOW_STAGES["Step1"]


# -- Step 2 ------------------------------------------------------------------------


def test_step2_flow_counts_candidates_and_groups(tiny_catalog):
    for name in ("cand a", "cand b", "cand c", "standalone asset"):
        tiny_catalog.add_asset(name, ["src"])
    study = Study(tiny_catalog)
    members = [a.id for a in study.catalog.assets.values() if a.name.startswith("cand")]
    study.record_embrace_assets(members, "candidate group")
    _, flow = run_step2(study.base, study.ledger)
    assert flow.counts() == {"candidates": 4, "groups": 2}


def test_step2_reference_flow(study_step2):
    _, flow = run_step2(study_step2.base, study_step2.ledger)
    assert flow.counts() == dfci.EXPECTED_FLOW_STAGES["Step2"]


def test_step2_requires_a_domain():
    catalog = make_tiny_catalog(None)
    with pytest.raises(DomainIndependentMode):
        run_step2(catalog, Ledger())


# -- Step 3 ------------------------------------------------------------------------


def test_step3_with_an_empty_matrix_keeps_only_retained(tiny_catalog):
    tiny_catalog.add_threat("Retained one", ["src"], DD)
    tiny_catalog.add_threat("Retained two", ["src"], DD)
    study = Study(tiny_catalog)
    snapshot, flow, _ = run_step3(study.base, study.ledger, [])
    counts = flow.counts()
    assert counts["combined"] == 0
    assert counts["retained"] == 2
    assert counts["total"] == 2


def test_step3_total_is_matrix_cells_plus_retained(tiny_catalog):
    a = tiny_catalog.add_threat("Independent a", ["src"], DI)
    b = tiny_catalog.add_threat("Independent b", ["src"], DI)
    tiny_catalog.add_threat("Retained evidence threat", ["src"], DD)
    for name in ("asset one", "asset two", "asset three"):
        tiny_catalog.add_asset(name, ["src"])
    study = Study(tiny_catalog)
    aids = sorted(study.catalog.assets)
    matrix = [(a.id, [aids[0], aids[2]]), (b.id, ALL_ASSETS)]
    snapshot, flow, _ = run_step3(study.base, study.ledger, matrix)
    counts = flow.counts()
    assert counts["combined"] == 2 + 3
    assert counts["retained"] == 1
    assert counts["total"] == 6
    assert counts["total"] == counts["combined"] + counts["retained"]


def test_step3_skips_pairs_already_combined(study_step2):
    study = study_step2
    matrix = dfci.fixture_matrix(study.catalog)
    snap1, flow1, ledger1 = run_step3(study.base, study.ledger, matrix)
    # Re-running over the extended ledger adds nothing and changes nothing.
    snap2, flow2, ledger2 = run_step3(study.base, ledger1, matrix)
    assert flow2.counts() == flow1.counts()
    assert ledger2.head_seq == ledger1.head_seq
    assert snap2.digest() == snap1.digest()


def test_step3_reference_flow(study_step2):
    matrix = dfci.fixture_matrix(study_step2.catalog)
    _, flow, _ = run_step3(study_step2.base, study_step2.ledger, matrix)
    assert flow.counts() == dfci.EXPECTED_FLOW_STAGES["Step3"]


# -- end to end ---------------------------------------------------------------------


def test_run_all_produces_three_flows_for_a_domain_study(study_step2):
    matrix = dfci.fixture_matrix(study_step2.catalog)
    snapshot, flows, full_ledger = run_all(study_step2.base, study_step2.ledger, matrix)
    assert [f.step for f in flows] == [StepTag.STEP1, StepTag.STEP2, StepTag.STEP3]
    expected = dfci.EXPECTED_FLOW_STAGES
    assert flows[0].counts() == expected["Step1"]
    assert flows[1].counts() == expected["Step2"]
    assert flows[2].counts() == expected["Step3"]


def test_run_all_skips_the_asset_step_without_a_domain():
    catalog = make_tiny_catalog(None)
    catalog.add_threat("Any threat", ["src"], DI)
    snapshot, flows, _ = run_all(catalog, Ledger(), [])
    assert [f.step for f in flows] == [StepTag.STEP1, StepTag.STEP3]


def test_stepwise_run_equals_one_full_replay(study_step2):
    matrix = dfci.fixture_matrix(study_step2.catalog)
    snapshot, _, full_ledger = run_all(study_step2.base, study_step2.ledger, matrix)
    replayed = replay(full_ledger, study_step2.base)
    assert replayed.to_canonical_json() == snapshot.to_canonical_json()


def test_counts_are_recomputable_from_any_snapshot(full_study):
    snapshot = replay(full_study.ledger, full_study.base)
    counts = stage_counts(snapshot)
    for key, want in dfci.EXPECTED_COUNTS.items():
        assert counts[key] == want, key


# -- matrix file format ----------------------------------------------------------------


def test_matrix_csv_round_trips():
    matrix = [("t1", ["a1", "a2"]), ("t2", ALL_ASSETS), ("t3", ["a3"])]
    text = format_matrix_csv(matrix)
    assert text.splitlines()[0] == "threat_id,asset_ids"
    assert parse_matrix_csv(text) == matrix


def test_matrix_csv_rejects_bad_headers_and_rows():
    with pytest.raises(SpadaError, match="header"):
        parse_matrix_csv("nope,nope\n")
    with pytest.raises(SpadaError, match="2 cells"):
        parse_matrix_csv("threat_id,asset_ids\nt1,a1,extra\n")


def test_matrix_csv_skips_blank_lines():
    assert parse_matrix_csv("threat_id,asset_ids\n\nt1,a1;a2\n,\n") == [("t1", ["a1", "a2"])]


def test_reference_matrix_covers_30_threats_with_291_cells(study_step2):
    matrix = dfci.fixture_matrix(study_step2.catalog)
    assert len(matrix) == 30
    cells = sum(15 if assets == ALL_ASSETS else len(assets) for _, assets in matrix)
    assert cells == 291
