"""Suggestion ranking and automatic proposal tagging.

Expected orderings were derived by hand from the toy vocabulary: direct
matches rank by synonym count (desc) then CUI; index matches rank by matched
stem count (desc), concept stem total (asc), synonym count (desc), CUI.
"""

from cuiwb import (
    AUTOTAG_ANNOTATOR,
    Annotation,
    Corpus,
    Document,
    auto_tag,
    direct_matches,
    index_matches,
    suggest,
)


def cuis(suggestions):
    return [s.cui for s in suggestions]


def test_direct_match_ambiguous_abbreviation(toy_index):
    got = direct_matches(toy_index, "PT ")
    assert cuis(got) == ["C0033707", "C0949766", "C1720310"]
    assert [s.synonym_count for s in got] == [3, 2, 2]
    assert [s.matched_stem_count for s in got] == [1, 1, 1]
    assert [s.concept_stem_count for s in got] == [4, 3, 4]
    assert got[0].preferred_name == "Prothrombin time"
    assert got[0].semantic_types == ("Laboratory Procedure",)


def test_direct_match_empty_for_unknown_text(toy_index):
    assert direct_matches(toy_index, "no such term") == []
    assert direct_matches(toy_index, "") == []


def test_index_matches_rank_by_stem_overlap(toy_index):
    got = index_matches(toy_index, "severe exacerbation of asthma", k=10)
    assert cuis(got) == ["C0038218", "C0349790", "C0004096", "C0205082"]
    assert [s.matched_stem_count for s in got] == [3, 2, 1, 1]


def test_index_matches_truncate_to_k(toy_index):
    got = index_matches(toy_index, "severe exacerbation of asthma", k=2)
    assert cuis(got) == ["C0038218", "C0349790"]


def test_suggest_separates_direct_from_partial(toy_index):
    result = suggest(toy_index, "asthma exacerbation", k=10)
    assert result.normalized_query == "asthma exacerbation"
    assert cuis(result.direct) == ["C0349790"]
    assert cuis(result.partial) == ["C0038218", "C0004096"]
    # direct CUIs never repeat in the partial list
    assert not set(cuis(result.direct)) & set(cuis(result.partial))


def test_suggest_respects_k_for_partial(toy_index):
    result = suggest(toy_index, "asthma exacerbation", k=1)
    assert cuis(result.partial) == ["C0038218"]


def test_suggest_json_shape(toy_index):
    d = suggest(toy_index, "asthma", k=5).to_json_dict()
    assert d["query"] == "asthma"
    assert d["k"] == 5
    assert d["direct"][0]["cui"] == "C0004096"
    assert {"cui", "preferred_name", "semantic_types", "synonym_count",
            "matched_stem_count", "concept_stem_count"} <= set(
        d["direct"][0]
    )


def doc(text, doc_id="d1"):
    return Document(id=doc_id, text=text)


def test_autotag_prefers_longest_unambiguous_match(toy_index):
    d = doc("Severe asthma exacerbation today. PT checked.")
    created = auto_tag(toy_index, d, [])
    assert [(a.start, a.end, set(a.cuis)) for a in created] == [
        (0, 26, {"C0038218"}),
    ]
    a = created[0]
    assert a.status == "proposed"
    assert a.annotator_id == AUTOTAG_ANNOTATOR
    assert not a.cui_less


def test_autotag_skips_ambiguous_terms(toy_index):
    # "pt" maps to three concepts, so it is never proposed
    created = auto_tag(toy_index, doc("PT pending."), [])
    assert created == []


def test_autotag_tags_repeats_separately(toy_index):
    created = auto_tag(toy_index, doc("Asthma stable. Asthma improving."), [])
    assert [(a.start, a.end) for a in created] == [(0, 6), (15, 21)]
    assert all(set(a.cuis) == {"C0004096"} for a in created)


def test_autotag_never_overlaps_existing_any_status(toy_index):
    d = doc("Severe asthma exacerbation today.")
    for status in ("accepted", "proposed", "rejected"):
        existing = [
            Annotation(
                id="x1", doc_id="d1", start=7, end=13,
                cuis=frozenset({"C0004096"}), cui_less=False,
                annotator_id="ann1", status=status,
            )
        ]
        created = auto_tag(toy_index, d, existing)
        # the long match is blocked; no shorter overlapping span is proposed
        assert all(
            a.end <= 7 or a.start >= 13 for a in created
        ), status


def test_autotag_falls_back_to_shorter_match_on_block(toy_index):
    # blocking "exacerbation" leaves "severe" and "asthma" taggable
    d = doc("Severe asthma exacerbation.")
    existing = [
        Annotation(
            id="x1", doc_id="d1", start=14, end=26,
            cuis=frozenset(), cui_less=True,
            annotator_id="ann1", status="accepted",
        )
    ]
    created = auto_tag(toy_index, d, existing)
    assert [(a.start, a.end, set(a.cuis)) for a in created] == [
        (0, 6, {"C0205082"}),
        (7, 13, {"C0004096"}),
    ]


def test_autotag_on_fixture_doc_with_blockers_is_a_noop(toy_corpus, toy_index):
    d = toy_corpus.documents["note-003"]
    existing = toy_corpus.annotations_for("note-003")
    assert auto_tag(toy_index, d, existing) == []
