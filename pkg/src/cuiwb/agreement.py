"""Inter-annotator agreement over accepted annotations.

Span identity is exact: two annotators marked "the same span" only when
(doc_id, start, end) match exactly. Span agreement is the Jaccard ratio of
the two span sets, defined as 1.0 when both are empty. CUI agreement is
computed over the coterminous spans only: a span counts as concordant when
the two label sets share at least one entry, where a label is a CUI or the
CUI-less sentinel (which matches only itself). With no coterminous spans the
ratio is undefined and reported as None.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .corpus import Annotation, Corpus
from .errors import UnknownAnnotator

Span = tuple[str, int, int]


def _span_sets(
    a: Iterable[Annotation], b: Iterable[Annotation]
) -> tuple[set[Span], set[Span]]:
    return {x.span() for x in a}, {x.span() for x in b}


def span_jaccard(a: Iterable[Annotation], b: Iterable[Annotation]) -> float:
    """|A and B| / |A or B| over exact span identity; 1.0 when both empty."""
    spans_a, spans_b = _span_sets(a, b)
    union = spans_a | spans_b
    if not union:
        return 1.0
    return len(spans_a & spans_b) / len(union)


def _labels_by_span(anns: Iterable[Annotation]) -> dict[Span, frozenset[str]]:
    out: dict[Span, frozenset[str]] = {}
    for ann in anns:
        key = ann.span()
        out[key] = out.get(key, frozenset()) | ann.labels()
    return out


def cui_agreement(
    a: Iterable[Annotation], b: Iterable[Annotation]
) -> float | None:
    """Fraction of coterminous spans whose label sets intersect; None if none."""
    labels_a = _labels_by_span(a)
    labels_b = _labels_by_span(b)
    common = labels_a.keys() & labels_b.keys()
    if not common:
        return None
    agreed = sum(1 for s in common if labels_a[s] & labels_b[s])
    return agreed / len(common)


@dataclass(frozen=True)
class DocumentAgreement:
    doc_id: str
    spans_a: int
    spans_b: int
    spans_union: int
    spans_intersection: int
    span_jaccard: float
    concordant_spans: int
    cui_agreement: float | None

    def to_json_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "spans_a": self.spans_a,
            "spans_b": self.spans_b,
            "spans_union": self.spans_union,
            "spans_intersection": self.spans_intersection,
            "span_jaccard": self.span_jaccard,
            "concordant_spans": self.concordant_spans,
            "cui_agreement": self.cui_agreement,
        }


@dataclass(frozen=True)
class AgreementReport:
    annotator_a: str
    annotator_b: str
    spans_a: int
    spans_b: int
    spans_union: int
    spans_intersection: int
    span_jaccard: float
    concordant_spans: int
    cui_agreement: float | None
    per_document: tuple[DocumentAgreement, ...]

    def to_json_dict(self) -> dict:
        return {
            "annotator_a": self.annotator_a,
            "annotator_b": self.annotator_b,
            "spans_a": self.spans_a,
            "spans_b": self.spans_b,
            "spans_union": self.spans_union,
            "spans_intersection": self.spans_intersection,
            "span_jaccard": self.span_jaccard,
            "concordant_spans": self.concordant_spans,
            "cui_agreement": self.cui_agreement,
            "per_document": [d.to_json_dict() for d in self.per_document],
        }


def _measure(
    a: list[Annotation], b: list[Annotation]
) -> tuple[int, int, int, int, float, int, float | None]:
    spans_a, spans_b = _span_sets(a, b)
    union = spans_a | spans_b
    inter = spans_a & spans_b
    jaccard = 1.0 if not union else len(inter) / len(union)
    labels_a = _labels_by_span(a)
    labels_b = _labels_by_span(b)
    concordant = sum(1 for s in inter if labels_a[s] & labels_b[s])
    agreement = concordant / len(inter) if inter else None
    return (
        len(spans_a),
        len(spans_b),
        len(union),
        len(inter),
        jaccard,
        concordant,
        agreement,
    )


def agreement_report(corpus: Corpus, a: str, b: str) -> AgreementReport:
    """Corpus-wide and per-document agreement between two annotators.

    An annotator must have at least one annotation of any status to be
    considered present; metrics then cover accepted annotations only.
    """
    present = {ann.annotator_id for ann in corpus.annotations.values()}
    for annotator in (a, b):
        if annotator not in present:
            raise UnknownAnnotator(annotator)

    accepted_a = list(corpus.accepted(a))
    accepted_b = list(corpus.accepted(b))

    per_document = []
    doc_ids = sorted(
        {x.doc_id for x in accepted_a} | {x.doc_id for x in accepted_b}
    )
    for doc_id in doc_ids:
        doc_a = [x for x in accepted_a if x.doc_id == doc_id]
        doc_b = [x for x in accepted_b if x.doc_id == doc_id]
        per_document.append(DocumentAgreement(doc_id, *_measure(doc_a, doc_b)))

    return AgreementReport(
        a, b, *_measure(accepted_a, accepted_b), tuple(per_document)
    )
