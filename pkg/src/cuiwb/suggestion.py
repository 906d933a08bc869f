"""Concept suggestion for highlighted text, and unambiguous auto-tagging.

Two routes feed suggestions. Direct matches come from the exact-lookup table
keyed on normalized text; an ambiguous term like "pt" yields one direct match
per CUI that uses it, ordered by synonym count (a prevalence proxy) so the
common reading appears first. Partial matches come from the inverted index:
every concept sharing at least one stem with the query is scored, so a query
like "severe exacerbation of asthma" surfaces "Severe asthma exacerbation"
even though no synonym matches verbatim.

Partial ranking key: more matched stems first, then fewer total stems in the
concept's synonyms (concise concepts win ties), then higher synonym count,
then CUI. Every comparison is total, so rankings are deterministic across
rebuilds of the same vocabulary.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass

from .corpus import Annotation, Document, new_annotation
from .vocabulary import (
    VocabularyIndex,
    _TOKEN_RE,
    normalize_term,
    stem_tokens,
)

AUTOTAG_ANNOTATOR = "autotag"
AUTOTAG_MAX_TOKENS = 6


@dataclass(frozen=True)
class Suggestion:
    cui: str
    preferred_name: str
    semantic_types: tuple[str, ...]
    synonym_count: int
    matched_stem_count: int
    concept_stem_count: int

    def to_json_dict(self) -> dict:
        return {
            "cui": self.cui,
            "preferred_name": self.preferred_name,
            "semantic_types": list(self.semantic_types),
            "synonym_count": self.synonym_count,
            "matched_stem_count": self.matched_stem_count,
            "concept_stem_count": self.concept_stem_count,
        }


@dataclass(frozen=True)
class SuggestionResult:
    query: str
    normalized_query: str
    k: int
    direct: tuple[Suggestion, ...]
    partial: tuple[Suggestion, ...]

    def to_json_dict(self) -> dict:
        return {
            "query": self.query,
            "normalized_query": self.normalized_query,
            "k": self.k,
            "direct": [s.to_json_dict() for s in self.direct],
            "partial": [s.to_json_dict() for s in self.partial],
        }


def _make_suggestion(
    idx: VocabularyIndex, cui: str, matched_stem_count: int
) -> Suggestion:
    concept = idx.concepts[cui]
    return Suggestion(
        cui=cui,
        preferred_name=concept.preferred_name,
        semantic_types=tuple(sorted(concept.semantic_types)),
        synonym_count=len(concept.synonyms),
        matched_stem_count=matched_stem_count,
        concept_stem_count=idx.stem_counts[cui],
    )


def direct_matches(idx: VocabularyIndex, text: str) -> list[Suggestion]:
    """Concepts with a synonym exactly matching the normalized text."""
    cuis = idx.lookup.get(normalize_term(text), frozenset())
    query_stems = set(stem_tokens(text))
    out = [
        _make_suggestion(idx, cui, _matched_count(idx, cui, query_stems))
        for cui in cuis
    ]
    out.sort(key=lambda s: (-s.synonym_count, s.cui))
    return out


def _matched_count(idx: VocabularyIndex, cui: str, query_stems: set[str]) -> int:
    n = 0
    for s in query_stems:
        posting = idx.inverted.get(s, ())
        j = bisect_left(posting, (cui,))
        if j < len(posting) and posting[j][0] == cui:
            n += 1
    return n


def index_matches(idx: VocabularyIndex, text: str, k: int) -> list[Suggestion]:
    """Concepts sharing at least one stem with the query, ranked, top k."""
    query_stems = sorted(set(stem_tokens(text)))
    matched: dict[str, int] = {}
    for s in query_stems:
        for cui, _ in idx.inverted.get(s, ()):
            matched[cui] = matched.get(cui, 0) + 1

    suggestions = [
        _make_suggestion(idx, cui, count) for cui, count in matched.items()
    ]
    suggestions.sort(
        key=lambda s: (
            -s.matched_stem_count,
            s.concept_stem_count,
            -s.synonym_count,
            s.cui,
        )
    )
    return suggestions[:k]


def suggest(idx: VocabularyIndex, text: str, k: int = 10) -> SuggestionResult:
    """Direct matches plus the top-k partial matches not already direct."""
    direct = direct_matches(idx, text)
    direct_cuis = {s.cui for s in direct}
    partial = [
        s
        for s in index_matches(idx, text, k + len(direct_cuis))
        if s.cui not in direct_cuis
    ][:k]
    return SuggestionResult(
        query=text,
        normalized_query=normalize_term(text),
        k=k,
        direct=tuple(direct),
        partial=tuple(partial),
    )


def _overlaps(start: int, end: int, existing: list[tuple[int, int]]) -> bool:
    return any(start < e and s < end for s, e in existing)


def auto_tag(
    idx: VocabularyIndex, doc: Document, existing: list[Annotation]
) -> list[Annotation]:
    """Propose annotations for unambiguous vocabulary matches in a document.

    Scans token n-grams (n up to 6) left to right; at each position the
    longest n-gram whose normalized text maps to exactly one CUI wins.
    Proposals never overlap each other or any existing annotation of the
    document, whatever its status, so a rejected proposal stays gone on
    re-runs. Emitted annotations carry status "proposed".
    """
    taken = [(a.start, a.end) for a in existing if a.doc_id == doc.id]
    tokens = [(m.start(), m.end()) for m in _TOKEN_RE.finditer(doc.text)]
    proposals: list[Annotation] = []

    i = 0
    while i < len(tokens):
        advanced = False
        for n in range(min(AUTOTAG_MAX_TOKENS, len(tokens) - i), 0, -1):
            start = tokens[i][0]
            end = tokens[i + n - 1][1]
            cuis = idx.lookup.get(normalize_term(doc.text[start:end]))
            if cuis is None or len(cuis) != 1:
                continue
            if _overlaps(start, end, taken):
                continue
            (cui,) = cuis
            proposals.append(
                new_annotation(
                    doc_id=doc.id,
                    start=start,
                    end=end,
                    cuis=[cui],
                    annotator_id=AUTOTAG_ANNOTATOR,
                    status="proposed",
                )
            )
            taken.append((start, end))
            i += n
            advanced = True
            break
        if not advanced:
            i += 1
    return proposals
