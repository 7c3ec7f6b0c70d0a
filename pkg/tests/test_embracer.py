"""Merge suggestion engine: tokenization, similarity metrics, clustering,
and the interactive curation session."""

from __future__ import annotations

import pytest

from spada import dfci
from spada.catalog import DependencyClass
from spada.embracer import (
    CurationSession,
    DEFAULT_THRESHOLD,
    METRIC_COSINE,
    METRIC_JACCARD,
    METRICS,
    Suggestion,
    SuggestionStatus,
    load_stopwords,
    normalize,
    similarity,
    suggest,
    suggestion_id,
    token_set,
)
from spada.errors import InvalidThreshold, StaleSuggestion, UnknownSuggestion
from spada.oplog import StepTag, Study

DI = DependencyClass.DOMAIN_INDEPENDENT
DD = DependencyClass.DOMAIN_DEPENDENT


# -- tokenization -----------------------------------------------------------------


def test_normalize_drops_stopwords_and_splits_on_punctuation():
    assert normalize("Unauthorized access to data") == ["unauthorized", "access", "data"]
    assert normalize("") == []
    assert normalize("Data process/read for wrong case") == [
        "data",
        "process",
        "read",
        "wrong",
        "case",
    ]


def test_normalize_keeps_token_order_and_repeats():
    assert normalize("data loss and data theft") == ["data", "loss", "data", "theft"]
    assert token_set("data loss and data theft") == frozenset({"data", "loss", "theft"})


def test_stopword_list_loads_once_and_contains_function_words():
    words = load_stopwords()
    assert {"to", "of", "the", "for", "by"} <= words
    assert "data" not in words
    assert load_stopwords() is words  # cached


def test_custom_stopwords_are_honored():
    assert normalize("alpha beta", stopwords=frozenset({"beta"})) == ["alpha"]


# -- similarity --------------------------------------------------------------------


def test_similarity_ignores_word_order():
    assert similarity("Unauthorized access to data", "Unauthorized data access") == 1.0


def test_similarity_is_zero_for_disjoint_descriptions():
    assert similarity("Unauthorized access to data", "Lack of authorization management") == 0.0


def test_similarity_is_reflexive():
    text = "Errors while uploading seized digital material"
    assert similarity(text, text) == 1.0
    assert similarity(text, text, metric=METRIC_COSINE) == 1.0


def test_similarity_edge_cases_match_across_metrics():
    for metric in METRICS:
        assert similarity("", "", metric=metric) == 1.0
        assert similarity("of the to", "for by", metric=metric) == 1.0  # all stopwords
        assert similarity("data", "", metric=metric) == 0.0


def test_jaccard_counts_shared_tokens_over_the_union():
    # {unauthorized, access, data} vs {unauthorized, access, data, platform}
    assert similarity(
        "Unauthorized access to data", "Unauthorized access to the data platform"
    ) == pytest.approx(3 / 4)


def test_cosine_weighs_term_frequencies():
    jac = similarity("Unauthorized access to data", "Unauthorized access to the data platform")
    cos = similarity(
        "Unauthorized access to data",
        "Unauthorized access to the data platform",
        metric=METRIC_COSINE,
    )
    assert cos == pytest.approx(3 / (12**0.5))  # dot 3 over sqrt(3)*sqrt(4)
    assert cos > jac


def test_unknown_metric_is_rejected():
    with pytest.raises(ValueError, match="unknown similarity metric"):
        similarity("a", "b", metric="hamming")
    with pytest.raises(ValueError):
        suggest([], metric="hamming")


# -- suggestion clustering ----------------------------------------------------------


def _pool(study: Study):
    return study.catalog.active_threats()


def test_identical_token_sets_cluster_even_at_threshold_one(tiny_study):
    tiny_study.catalog.add_threat("Unauthorized access to data", ["src"], DI)
    tiny_study.catalog.add_threat("Unauthorized data access", ["src"], DI)
    tiny_study.catalog.add_threat("Something unrelated", ["src"], DI)
    out = suggest(_pool(tiny_study), threshold=1.0)
    assert len(out) == 1
    assert len(out[0].members) == 2
    assert out[0].score == 1.0


def test_disjoint_descriptions_never_cluster_even_at_threshold_zero(tiny_study):
    tiny_study.catalog.add_threat("Alpha one", ["src"], DI)
    tiny_study.catalog.add_threat("Beta two", ["src"], DI)
    tiny_study.catalog.add_threat("Gamma three", ["src"], DI)
    assert suggest(_pool(tiny_study), threshold=0.0) == []


def test_threshold_domain_is_the_closed_unit_interval():
    assert suggest([], threshold=0.0) == []
    assert suggest([], threshold=1.0) == []
    with pytest.raises(InvalidThreshold):
        suggest([], threshold=-0.1)
    with pytest.raises(InvalidThreshold):
        suggest([], threshold=1.1)


def test_suggestions_never_cross_the_dependency_boundary(tiny_study):
    tiny_study.catalog.add_threat("Evidence tampering detected", ["src"], DD)
    tiny_study.catalog.add_threat("Tampering detected", ["src"], DI)
    assert suggest(_pool(tiny_study), threshold=0.1) == []
    tiny_study.catalog.add_threat("Data tampering detected", ["src"], DI)
    out = suggest(_pool(tiny_study), threshold=0.1)
    assert len(out) == 1
    deps = {tiny_study.catalog.threats[m].dependency for m in out[0].members}
    assert deps == {DI}


def test_combination_products_are_never_suggested(study_step2):
    study = study_step2
    parent = study.catalog.find_threat_by_description("Unauthorized access to data")
    study.record_combine(parent.id, sorted(study.catalog.assets), step=StepTag.STEP3)
    # The 15 children share a long common prefix, far above any threshold.
    out = suggest(_pool(study), threshold=0.5)
    combined_ids = {t.id for t in study.catalog.threats.values() if t.combination is not None}
    for s in out:
        assert not (set(s.members) & combined_ids)


def test_single_link_chains_transitively(tiny_study):
    tiny_study.catalog.add_threat("alpha beta", ["src"], DI)
    tiny_study.catalog.add_threat("beta gamma", ["src"], DI)
    tiny_study.catalog.add_threat("gamma delta", ["src"], DI)
    out = suggest(_pool(tiny_study), threshold=1 / 3)
    assert len(out) == 1
    assert len(out[0].members) == 3
    # Cluster score is the weakest pairwise link: alpha-beta vs gamma-delta share nothing...
    # ("alpha beta" vs "gamma delta") is 0, so the min over all pairs is 0.
    assert out[0].score == 0.0


def test_cluster_score_is_the_minimum_pairwise_similarity(tiny_study):
    tiny_study.catalog.add_threat("alpha beta gamma", ["src"], DI)
    tiny_study.catalog.add_threat("alpha beta delta", ["src"], DI)
    out = suggest(_pool(tiny_study), threshold=0.5)
    assert len(out) == 1
    assert out[0].score == pytest.approx(2 / 4)


def test_proposed_description_is_the_most_agreeing_member(tiny_study):
    # "alpha beta" overlaps both others; the outer two overlap each other less.
    hub = tiny_study.catalog.add_threat("alpha beta", ["src"], DI)
    tiny_study.catalog.add_threat("alpha beta gamma", ["src"], DI)
    tiny_study.catalog.add_threat("alpha beta delta", ["src"], DI)
    out = suggest(_pool(tiny_study), threshold=0.4)
    assert len(out) == 1
    assert out[0].proposed_description == hub.description


def test_suggestion_output_is_deterministic(study_step2):
    threats = list(study_step2.catalog.active_threats())
    first = suggest(threats, threshold=0.3)
    second = suggest(list(reversed(threats)), threshold=0.3)
    assert [s.to_dict() for s in first] == [s.to_dict() for s in second]
    # Ordered by descending score, then member tuple.
    scores = [s.score for s in first]
    assert scores == sorted(scores, reverse=True)


def test_suggestion_ids_derive_from_the_member_set():
    assert suggestion_id(["b", "a"]) == suggestion_id(["a", "b"])
    assert suggestion_id(["a", "b"]) != suggestion_id(["a", "c"])


def test_metric_changes_which_pairs_qualify(tiny_study):
    # Same token sets, different frequency profile: jaccard 2/3, cosine
    # 4/sqrt(30) ~ 0.73 because the repeated token weighs in.
    tiny_study.catalog.add_threat("data data data loss", ["src"], DI)
    tiny_study.catalog.add_threat("data loss event", ["src"], DI)
    jac = suggest(_pool(tiny_study), threshold=0.7, metric=METRIC_JACCARD)
    cos = suggest(_pool(tiny_study), threshold=0.7, metric=METRIC_COSINE)
    assert jac == []
    assert len(cos) == 1


# -- the reference pool under the default threshold -----------------------------------


def test_reference_pool_surfaces_two_redundancy_clusters(base_catalog):
    """At the post-discard state the suggester finds exactly the two lexical
    near-duplicates; the remaining refinement merges of the source study are
    semantic judgments below the default similarity bar, so they stay manual."""
    study = Study(base_catalog)
    for d in ("Malicious code injection", "Denial of service attack", "Loss of encryption key"):
        study.record_discard(study.catalog.find_threat_by_description(d).id, dfci.DISCARD_REASON)
    assert study.catalog.active_count() == 43
    out = suggest(study.catalog.active_threats(), DEFAULT_THRESHOLD)
    proposals = {s.proposed_description for s in out}
    assert proposals == {"Lack of privacy management", "Unauthorized access to data"}
    assert all(s.score == 0.5 and len(s.members) == 2 for s in out)
    # Accepting everything the engine proposes merges two pairs: 43 -> 41.
    session = CurationSession(study, DEFAULT_THRESHOLD)
    while session.pending():
        session.accept(session.pending()[0].id)
    assert study.catalog.active_count() == 41


# -- curation session ------------------------------------------------------------------


def _session_with_pair() -> tuple[CurationSession, Study]:
    from tests.conftest import make_tiny_catalog

    study = Study(make_tiny_catalog())
    study.catalog.add_threat("Unauthorized access to data", ["src"], DI)
    study.catalog.add_threat("Unauthorized data access", ["src"], DI)
    study.catalog.add_threat("Poor training", ["src"], DI)
    return CurationSession(study, threshold=0.5), study


def test_accepting_a_suggestion_records_one_embrace():
    session, study = _session_with_pair()
    (pending,) = session.pending()
    head_before = study.ledger.head_seq
    record, new_id = session.accept(pending.id)
    assert study.ledger.head_seq == head_before + 1
    assert record.kind.value == "Embrace"
    merged = study.catalog.get_threat(new_id)
    assert merged.description == pending.proposed_description
    assert session.pending() == []
    assert [s.status for s in session.history()] == [SuggestionStatus.ACCEPTED]


def test_accepting_with_an_edited_description():
    session, study = _session_with_pair()
    (pending,) = session.pending()
    _, new_id = session.accept(pending.id, description="Lack of authorization management")
    assert study.catalog.get_threat(new_id).description == "Lack of authorization management"


def test_accepting_follows_the_study_step():
    # A study whose ledger has moved past the collection step must still
    # take accepts; the record lands at the current step, not the first one.
    session, study = _session_with_pair()
    other = study.catalog.find_threat_by_description("Poor training")
    study.record_discard(other.id, "out of scope", step=StepTag.STEP2)
    (pending,) = session.pending()
    record, _ = session.accept(pending.id)
    assert record.step is StepTag.STEP2


def test_rejecting_leaves_catalog_and_ledger_unchanged():
    session, study = _session_with_pair()
    catalog_before = study.catalog.to_canonical_json()
    head_before = study.ledger.head_seq
    (pending,) = session.pending()
    session.reject(pending.id)
    assert study.catalog.to_canonical_json() == catalog_before
    assert study.ledger.head_seq == head_before
    # The exact member set is never proposed again in this session.
    assert session.pending() == []
    assert session.refresh() == []


def test_accepting_after_a_member_was_merged_elsewhere_is_stale():
    session, study = _session_with_pair()
    (pending,) = session.pending()
    other = study.catalog.find_threat_by_description("Poor training")
    member = pending.members[0]
    study.record_embrace([member, other.id], "Swallowed by a manual merge")
    with pytest.raises(StaleSuggestion):
        session.accept(pending.id)


def test_unknown_suggestion_id_is_rejected():
    session, _ = _session_with_pair()
    with pytest.raises(UnknownSuggestion):
        session.accept("feedbeef0000")
    with pytest.raises(UnknownSuggestion):
        session.reject("feedbeef0000")


def test_session_threshold_and_metric_are_validated(tiny_study):
    with pytest.raises(InvalidThreshold):
        CurationSession(tiny_study, threshold=2.0)
    with pytest.raises(ValueError):
        CurationSession(tiny_study, metric="hamming")


def test_session_refresh_sees_new_threats():
    session, study = _session_with_pair()
    (pending,) = session.pending()
    session.reject(pending.id)
    study.catalog.add_threat("Poor training of staff", ["src"], DI)
    fresh = session.refresh()
    assert len(fresh) == 1
    assert "Poor training" in fresh[0].proposed_description


def test_suggestion_to_dict_shape():
    s = Suggestion(id="abc", members=("t1", "t2"), score=0.51234567, proposed_description="X")
    d = s.to_dict()
    assert d == {
        "id": "abc",
        "members": ["t1", "t2"],
        "proposed_description": "X",
        "score": 0.512346,
        "status": "Pending",
    }
