"""Annotated corpus: documents, annotations, lints, stats and JSON round-trip.

An annotation marks a contiguous character range of one document with one or
more CUIs, or with the CUI-less sentinel when no vocabulary concept fits.
Offsets count Unicode scalar values and ends are exclusive. Overlapping and
nested annotations are expected; a compound phrase, its parts, and broader
context spans may all be tagged on the same text.

Invariants are enforced on the mutation path (add, update, status changes).
Importing a corpus file re-checks structure strictly but admits annotations
that would fail content lints, so that `lint_corpus` can report them.
"""

from __future__ import annotations

import json
import re
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import BinaryIO, Iterable, Iterator

from .errors import (
    DuplicateAnnotation,
    DuplicateDocument,
    EmptyLabel,
    InvalidOffsets,
    InvalidStatusTransition,
    MalformedCorpusFile,
    UnknownAnnotation,
    UnknownDocument,
)
from .vocabulary import VocabularyIndex, normalize_term

# Sentinel label for spans that name a concept absent from the vocabulary.
CUI_LESS = "CUI-less"

STATUSES = ("proposed", "accepted", "rejected")

# Fraction of an outer CUI-less span's non-whitespace characters that nested
# annotations must jointly cover before the outer marker counts as redundant.
REDUNDANT_CUILESS_COVERAGE = 0.8


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    note_type: str | None = None
    section: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "note_type": self.note_type,
            "section": self.section,
        }


@dataclass(frozen=True)
class Annotation:
    id: str
    doc_id: str
    start: int
    end: int
    cuis: frozenset[str]
    cui_less: bool
    annotator_id: str
    status: str = "accepted"
    created_at: datetime = field(
        default_factory=lambda: datetime.now(timezone.utc)
    )

    def labels(self) -> frozenset[str]:
        """CUIs plus the sentinel when marked CUI-less."""
        if self.cui_less:
            return self.cuis | {CUI_LESS}
        return self.cuis

    def span(self) -> tuple[str, int, int]:
        return (self.doc_id, self.start, self.end)

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "doc_id": self.doc_id,
            "start": self.start,
            "end": self.end,
            "cuis": sorted(self.cuis),
            "cui_less": self.cui_less,
            "annotator_id": self.annotator_id,
            "status": self.status,
            "created_at": self.created_at.isoformat(),
        }


def _dedup_key(ann: Annotation) -> tuple:
    return (ann.doc_id, ann.start, ann.end, ann.annotator_id, ann.cuis, ann.cui_less)


class Corpus:
    """In-memory corpus. Not thread safe; callers serialize mutations."""

    def __init__(self) -> None:
        self.documents: dict[str, Document] = {}
        self.annotations: dict[str, Annotation] = {}
        self._doc_anns: dict[str, list[str]] = {}
        self._dedup: dict[tuple, set[str]] = {}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Corpus):
            return NotImplemented
        return (
            self.documents == other.documents
            and self.annotations == other.annotations
        )

    def add_document(self, doc: Document) -> str:
        if not doc.id:
            doc = replace(doc, id=uuid.uuid4().hex)
        if doc.id in self.documents:
            raise DuplicateDocument(doc.id)
        self.documents[doc.id] = doc
        self._doc_anns.setdefault(doc.id, [])
        return doc.id

    def _check_annotation(self, ann: Annotation) -> None:
        doc = self.documents.get(ann.doc_id)
        if doc is None:
            raise UnknownDocument(ann.doc_id)
        if not (0 <= ann.start < ann.end <= len(doc.text)):
            raise InvalidOffsets(
                f"[{ann.start}, {ann.end}) outside document of length {len(doc.text)}"
            )
        if not ann.cuis and not ann.cui_less:
            raise EmptyLabel(f"annotation {ann.id or '(new)'} carries no label")
        if ann.status not in STATUSES:
            raise ValueError(f"unknown status {ann.status!r}")

    def add_annotation(
        self, ann: Annotation, idx: VocabularyIndex | None = None
    ) -> str:
        """Insert after validating offsets and labels. Returns the annotation id.

        The vocabulary index is accepted for interface symmetry; unknown CUIs
        are deliberately not insertion errors (they surface as L3 lint
        warnings), so it goes unused here.
        """
        del idx
        if not ann.id:
            ann = replace(ann, id=uuid.uuid4().hex)
        if ann.id in self.annotations:
            raise DuplicateAnnotation(f"annotation id {ann.id} already present")
        self._check_annotation(ann)
        key = _dedup_key(ann)
        if self._dedup.get(key):
            raise DuplicateAnnotation(
                f"identical annotation exists at ({ann.doc_id}, {ann.start}, "
                f"{ann.end}) by {ann.annotator_id}"
            )
        self._insert_raw(ann)
        return ann.id

    def _insert_raw(self, ann: Annotation) -> None:
        self.annotations[ann.id] = ann
        self._doc_anns.setdefault(ann.doc_id, []).append(ann.id)
        self._dedup.setdefault(_dedup_key(ann), set()).add(ann.id)

    def update_annotation(self, ann: Annotation) -> Annotation:
        """Replace an existing annotation's fields, revalidating."""
        old = self.annotations.get(ann.id)
        if old is None:
            raise UnknownAnnotation(ann.id)
        self._check_annotation(ann)
        key = _dedup_key(ann)
        others = self._dedup.get(key, set()) - {ann.id}
        if others:
            raise DuplicateAnnotation(
                f"identical annotation exists at ({ann.doc_id}, {ann.start}, "
                f"{ann.end}) by {ann.annotator_id}"
            )
        self._dedup[_dedup_key(old)].discard(ann.id)
        if ann.doc_id != old.doc_id:
            self._doc_anns[old.doc_id].remove(ann.id)
            self._doc_anns.setdefault(ann.doc_id, []).append(ann.id)
        self.annotations[ann.id] = ann
        self._dedup.setdefault(key, set()).add(ann.id)
        return ann

    def remove_annotation(self, ann_id: str) -> Annotation:
        ann = self.annotations.pop(ann_id, None)
        if ann is None:
            raise UnknownAnnotation(ann_id)
        self._doc_anns[ann.doc_id].remove(ann_id)
        self._dedup[_dedup_key(ann)].discard(ann_id)
        return ann

    def set_status(self, ann_id: str, status: str) -> Annotation:
        """Resolve a proposal. Only proposed -> accepted/rejected is legal."""
        ann = self.annotations.get(ann_id)
        if ann is None:
            raise UnknownAnnotation(ann_id)
        if ann.status != "proposed" or status not in ("accepted", "rejected"):
            raise InvalidStatusTransition(ann.status, status)
        updated = replace(ann, status=status)
        self.annotations[ann_id] = updated
        return updated

    def annotations_for(self, doc_id: str) -> list[Annotation]:
        if doc_id not in self.documents:
            raise UnknownDocument(doc_id)
        return [self.annotations[i] for i in self._doc_anns.get(doc_id, [])]

    def annotators(self) -> list[str]:
        return sorted({a.annotator_id for a in self.annotations.values()})

    def accepted(self, annotator_id: str | None = None) -> Iterator[Annotation]:
        for ann in self.annotations.values():
            if ann.status != "accepted":
                continue
            if annotator_id is not None and ann.annotator_id != annotator_id:
                continue
            yield ann


@dataclass(frozen=True)
class LintFinding:
    rule: str
    severity: str  # error | warning | info
    doc_id: str | None
    annotation_id: str | None
    start: int | None
    end: int | None
    message: str

    def to_json_dict(self) -> dict:
        return {
            "rule": self.rule,
            "severity": self.severity,
            "doc_id": self.doc_id,
            "annotation_id": self.annotation_id,
            "start": self.start,
            "end": self.end,
            "message": self.message,
        }


def _sort_findings(findings: list[LintFinding]) -> list[LintFinding]:
    return sorted(
        findings,
        key=lambda f: (
            f.rule,
            f.doc_id or "",
            f.start if f.start is not None else -1,
            f.end if f.end is not None else -1,
            f.annotation_id or "",
            f.message,
        ),
    )


def _occurrence_pattern(normalized: str) -> re.Pattern:
    words = [re.escape(w) for w in normalized.split(" ")]
    body = r"\s+".join(words)
    # Alphanumeric boundaries so "asthma" does not hit inside "asthmatic".
    return re.compile(
        r"(?<![^\W_])" + body + r"(?![^\W_])", re.IGNORECASE | re.UNICODE
    )


def lint_corpus(
    corpus: Corpus, idx: VocabularyIndex | None = None
) -> list[LintFinding]:
    """Run all content lints. Deterministic: output order is fully sorted.

    L1_offsets, L2_empty_label: error. L3_unknown_cui: warning (skipped when
    no index is supplied). L4_untagged_repeat, L5_redundant_cuiless: info.
    """
    findings: list[LintFinding] = []

    for ann in corpus.annotations.values():
        doc = corpus.documents.get(ann.doc_id)
        if doc is None or not (0 <= ann.start < ann.end <= len(doc.text)):
            doc_len = len(doc.text) if doc else "missing document"
            findings.append(
                LintFinding(
                    "L1_offsets", "error", ann.doc_id, ann.id, ann.start, ann.end,
                    f"offsets [{ann.start}, {ann.end}) invalid ({doc_len})",
                )
            )
        if not ann.cuis and not ann.cui_less:
            findings.append(
                LintFinding(
                    "L2_empty_label", "error", ann.doc_id, ann.id, ann.start,
                    ann.end, "no CUIs and not marked CUI-less",
                )
            )
        if idx is not None:
            for cui in sorted(ann.cuis):
                if cui not in idx.concepts:
                    findings.append(
                        LintFinding(
                            "L3_unknown_cui", "warning", ann.doc_id, ann.id,
                            ann.start, ann.end,
                            f"CUI {cui} not in vocabulary",
                        )
                    )

    findings.extend(_lint_untagged_repeats(corpus))
    findings.extend(_lint_redundant_cuiless(corpus))
    return _sort_findings(findings)


def _lint_untagged_repeats(corpus: Corpus) -> list[LintFinding]:
    findings = []
    seen: set[tuple[str, int, int]] = set()
    for doc_id, doc in corpus.documents.items():
        anns = [a for a in corpus.annotations.values() if a.doc_id == doc_id]
        covering = [a for a in anns if a.status != "rejected"]
        for ann in anns:
            if ann.status != "accepted":
                continue
            if not (0 <= ann.start < ann.end <= len(doc.text)):
                continue
            normalized = normalize_term(doc.text[ann.start : ann.end])
            if not normalized:
                continue
            for m in _occurrence_pattern(normalized).finditer(doc.text):
                occ = (doc_id, m.start(), m.end())
                if occ in seen:
                    continue
                if any(c.start <= m.start() and m.end() <= c.end for c in covering):
                    continue
                seen.add(occ)
                findings.append(
                    LintFinding(
                        "L4_untagged_repeat", "info", doc_id, None,
                        m.start(), m.end(),
                        f"{normalized!r} is tagged elsewhere but not here",
                    )
                )
    return findings


def _lint_redundant_cuiless(corpus: Corpus) -> list[LintFinding]:
    findings = []
    for doc_id, doc in corpus.documents.items():
        anns = [a for a in corpus.annotations.values() if a.doc_id == doc_id]
        accepted = [a for a in anns if a.status == "accepted"]
        for outer in anns:
            if not outer.cui_less or outer.status == "rejected":
                continue
            if not (0 <= outer.start < outer.end <= len(doc.text)):
                continue
            contained = [
                a
                for a in accepted
                if a.id != outer.id
                and a.start >= outer.start
                and a.end <= outer.end
                and (a.start, a.end) != (outer.start, outer.end)
            ]
            if len(contained) < 2:
                continue
            content = [
                i
                for i in range(outer.start, outer.end)
                if not doc.text[i].isspace()
            ]
            if not content:
                continue
            covered = set()
            for a in contained:
                covered.update(range(a.start, a.end))
            coverage = sum(1 for i in content if i in covered) / len(content)
            if coverage >= REDUNDANT_CUILESS_COVERAGE:
                findings.append(
                    LintFinding(
                        "L5_redundant_cuiless", "info", doc_id, outer.id,
                        outer.start, outer.end,
                        "nested annotations already cover this CUI-less span",
                    )
                )
    return findings


@dataclass(frozen=True)
class StatsRow:
    doc_id: str
    annotator_id: str
    span_count: int
    unique_cui_count: int


@dataclass(frozen=True)
class CorpusStats:
    rows: tuple[StatsRow, ...]
    document_count: int
    annotator_count: int
    span_count: int
    unique_cui_count: int

    def to_json_dict(self) -> dict:
        return {
            "rows": [
                {
                    "doc_id": r.doc_id,
                    "annotator_id": r.annotator_id,
                    "span_count": r.span_count,
                    "unique_cui_count": r.unique_cui_count,
                }
                for r in self.rows
            ],
            "document_count": self.document_count,
            "annotator_count": self.annotator_count,
            "span_count": self.span_count,
            "unique_cui_count": self.unique_cui_count,
        }


def corpus_stats(corpus: Corpus) -> CorpusStats:
    """Accepted-annotation counts per (document, annotator), plus totals.

    span_count counts distinct (start, end) ranges; unique_cui_count counts
    the union of the CUI sets.
    """
    groups: dict[tuple[str, str], list[Annotation]] = {}
    for ann in corpus.accepted():
        groups.setdefault((ann.doc_id, ann.annotator_id), []).append(ann)

    rows = []
    all_cuis: set[str] = set()
    total_spans = 0
    for (doc_id, annotator_id), anns in sorted(groups.items()):
        spans = {(a.start, a.end) for a in anns}
        cuis: set[str] = set()
        for a in anns:
            cuis.update(a.cuis)
        all_cuis.update(cuis)
        total_spans += len(spans)
        rows.append(StatsRow(doc_id, annotator_id, len(spans), len(cuis)))

    return CorpusStats(
        rows=tuple(rows),
        document_count=len(corpus.documents),
        annotator_count=len(corpus.annotators()),
        span_count=total_spans,
        unique_cui_count=len(all_cuis),
    )


def export_corpus(corpus: Corpus) -> bytes:
    """Serialize to the corpus JSON shape. Deterministic: sorted by id."""
    payload = {
        "documents": [
            corpus.documents[i].to_json_dict() for i in sorted(corpus.documents)
        ],
        "annotations": [
            corpus.annotations[i].to_json_dict() for i in sorted(corpus.annotations)
        ],
    }
    return json.dumps(payload, ensure_ascii=False, indent=2).encode("utf-8")


def _require(obj: dict, key: str, types, location: str):
    if key not in obj:
        raise MalformedCorpusFile(f"{location}.{key}", "missing")
    value = obj[key]
    if isinstance(value, bool) and bool not in (
        types if isinstance(types, tuple) else (types,)
    ):
        raise MalformedCorpusFile(f"{location}.{key}", "wrong type")
    if not isinstance(value, types):
        raise MalformedCorpusFile(f"{location}.{key}", "wrong type")
    return value


def _optional_str(obj: dict, key: str, location: str) -> str | None:
    value = obj.get(key)
    if value is None:
        return None
    if not isinstance(value, str):
        raise MalformedCorpusFile(f"{location}.{key}", "wrong type")
    return value


def parse_timestamp(raw: str, location: str = "created_at") -> datetime:
    try:
        return datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError:
        raise MalformedCorpusFile(location, f"invalid timestamp {raw!r}") from None


def import_corpus(data: bytes | str | BinaryIO) -> Corpus:
    """Parse corpus JSON. Structural problems raise MalformedCorpusFile with a
    location like "annotations[3].start"; content-lint violations load anyway.
    """
    if hasattr(data, "read"):
        data = data.read()
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedCorpusFile("(file)", f"invalid UTF-8: {exc.reason}") from None
    try:
        payload = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedCorpusFile("(file)", f"invalid JSON: {exc.msg}") from None
    if not isinstance(payload, dict):
        raise MalformedCorpusFile("(file)", "top level must be an object")

    docs = payload.get("documents")
    anns = payload.get("annotations")
    if not isinstance(docs, list):
        raise MalformedCorpusFile("documents", "missing or not a list")
    if not isinstance(anns, list):
        raise MalformedCorpusFile("annotations", "missing or not a list")

    corpus = Corpus()
    for i, d in enumerate(docs):
        loc = f"documents[{i}]"
        if not isinstance(d, dict):
            raise MalformedCorpusFile(loc, "not an object")
        doc_id = _require(d, "id", str, loc)
        if not doc_id:
            raise MalformedCorpusFile(f"{loc}.id", "empty")
        if doc_id in corpus.documents:
            raise MalformedCorpusFile(f"{loc}.id", f"duplicate document id {doc_id}")
        doc = Document(
            id=doc_id,
            text=_require(d, "text", str, loc),
            note_type=_optional_str(d, "note_type", loc),
            section=_optional_str(d, "section", loc),
        )
        corpus.documents[doc.id] = doc
        corpus._doc_anns.setdefault(doc.id, [])

    for i, a in enumerate(anns):
        loc = f"annotations[{i}]"
        if not isinstance(a, dict):
            raise MalformedCorpusFile(loc, "not an object")
        ann_id = _require(a, "id", str, loc)
        if not ann_id:
            raise MalformedCorpusFile(f"{loc}.id", "empty")
        if ann_id in corpus.annotations:
            raise MalformedCorpusFile(f"{loc}.id", f"duplicate annotation id {ann_id}")
        doc_id = _require(a, "doc_id", str, loc)
        if doc_id not in corpus.documents:
            raise MalformedCorpusFile(f"{loc}.doc_id", f"unknown document {doc_id}")
        cuis_raw = _require(a, "cuis", list, loc)
        for j, c in enumerate(cuis_raw):
            if not isinstance(c, str) or not c:
                raise MalformedCorpusFile(f"{loc}.cuis[{j}]", "wrong type")
        status = _require(a, "status", str, loc)
        if status not in STATUSES:
            raise MalformedCorpusFile(f"{loc}.status", f"unknown status {status!r}")
        annotator = _require(a, "annotator_id", str, loc)
        if not annotator:
            raise MalformedCorpusFile(f"{loc}.annotator_id", "empty")
        ann = Annotation(
            id=ann_id,
            doc_id=doc_id,
            start=_require(a, "start", int, loc),
            end=_require(a, "end", int, loc),
            cuis=frozenset(cuis_raw),
            cui_less=_require(a, "cui_less", bool, loc),
            annotator_id=annotator,
            status=status,
            created_at=parse_timestamp(
                _require(a, "created_at", str, loc), f"{loc}.created_at"
            ),
        )
        corpus._insert_raw(ann)
    return corpus


def new_annotation(
    doc_id: str,
    start: int,
    end: int,
    cuis: Iterable[str] = (),
    cui_less: bool = False,
    annotator_id: str = "",
    status: str = "accepted",
    ann_id: str = "",
    created_at: datetime | None = None,
) -> Annotation:
    """Convenience constructor with a fresh id and timestamp by default."""
    return Annotation(
        id=ann_id or uuid.uuid4().hex,
        doc_id=doc_id,
        start=start,
        end=end,
        cuis=frozenset(cuis),
        cui_less=cui_less,
        annotator_id=annotator_id,
        status=status,
        created_at=created_at or datetime.now(timezone.utc),
    )
