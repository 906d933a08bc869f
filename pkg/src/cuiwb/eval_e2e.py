"""End-to-end evaluation of span+CUI predictions against annotated gold.

Two modes share one report shape.

Lenient mode scores MCN-style gold spans: a CUI-bearing span is correct when
any prediction overlaps it and names one of its CUIs; a CUI-less span is
correct unless a prediction claims a concept on exactly that span. Extra
predictions are never penalized.

Framework mode scores against the union of two annotators' accepted
annotations: coterminous annotations merge their label sets, and spans whose
merged label set is empty (CUI-less only) are dropped. A merged span is
recognized when a prediction matches it under the chosen match mode (exact
offsets, or any overlap); its CUI is correct when such a prediction names a
merged label. CUI precision is cuis_correct / spans_correct, undefined when
nothing was recognized.

Compound analysis looks at maximal compound spans: gold spans that strictly
contain another gold span and are strictly contained in none. A missed
compound earns subspan credit when some strictly contained gold span was
recognized with a correct CUI.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .corpus import CUI_LESS, Annotation
from .errors import MalformedEvalFile
from .eval_norm import GoldSpan
from .vocabulary import ConceptSet

MATCH_MODES = ("exact", "overlap")


@dataclass(frozen=True)
class E2EPrediction:
    doc_id: str
    start: int
    end: int
    cui: str  # a CUI or the CUI-less sentinel


@dataclass(frozen=True)
class MergedGoldSpan:
    doc_id: str
    start: int
    end: int
    cuis: frozenset[str]
    cui_less: bool = False

    def labels(self) -> frozenset[str]:
        return frozenset([CUI_LESS]) if self.cui_less else self.cuis


def load_predictions_jsonl(data: bytes) -> list[E2EPrediction]:
    """Parse JSONL predictions: {"doc_id", "start", "end", "cui"} per line."""
    preds: list[E2EPrediction] = []
    for lineno, line in enumerate(data.split(b"\n"), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            obj = json.loads(stripped.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise MalformedEvalFile(lineno, f"invalid JSON line: {exc}") from None
        if not isinstance(obj, dict):
            raise MalformedEvalFile(lineno, "prediction must be an object")
        try:
            doc_id, start, end, cui = obj["doc_id"], obj["start"], obj["end"], obj["cui"]
        except KeyError as exc:
            raise MalformedEvalFile(lineno, f"missing key {exc}") from None
        if (
            not isinstance(doc_id, str)
            or not isinstance(cui, str)
            or isinstance(start, bool)
            or isinstance(end, bool)
            or not isinstance(start, int)
            or not isinstance(end, int)
        ):
            raise MalformedEvalFile(lineno, "wrong field type")
        if start < 0 or end <= start:
            raise MalformedEvalFile(lineno, f"invalid offsets [{start}, {end})")
        preds.append(E2EPrediction(doc_id, start, end, cui))
    return preds


def _overlaps(s: MergedGoldSpan | GoldSpan, p: E2EPrediction) -> bool:
    return s.doc_id == p.doc_id and s.start < p.end and p.start < s.end


def _exact(s: MergedGoldSpan | GoldSpan, p: E2EPrediction) -> bool:
    return s.doc_id == p.doc_id and s.start == p.start and s.end == p.end


def _matches(mode: str, s, p: E2EPrediction) -> bool:
    return _exact(s, p) if mode == "exact" else _overlaps(s, p)


@dataclass(frozen=True)
class LenientResult:
    per_span: Mapping[str, bool]
    accuracy: float | None  # percent; None with no gold spans
    unknown_docs: tuple[str, ...]

    def to_json_dict(self) -> dict:
        return {
            "per_span": dict(sorted(self.per_span.items())),
            "accuracy": self.accuracy,
            "unknown_docs": list(self.unknown_docs),
        }


def lenient_eval(
    gold: Sequence[GoldSpan], preds: Sequence[E2EPrediction]
) -> LenientResult:
    """Score predictions against gold spans under the lenient rule.

    Predictions for documents no gold span references are reported in
    unknown_docs and otherwise ignored.
    """
    gold_docs = {s.doc_id for s in gold}
    unknown = tuple(sorted({p.doc_id for p in preds} - gold_docs))
    usable = [p for p in preds if p.doc_id in gold_docs]

    per_span: dict[str, bool] = {}
    for s in gold:
        if s.cui_less:
            per_span[s.span_id] = not any(
                _exact(s, p) and p.cui != CUI_LESS for p in usable
            )
        else:
            per_span[s.span_id] = any(
                _overlaps(s, p) and p.cui in s.gold_cuis for p in usable
            )
    accuracy = (
        100.0 * sum(per_span.values()) / len(per_span) if per_span else None
    )
    return LenientResult(per_span=per_span, accuracy=accuracy, unknown_docs=unknown)


def merge_gold(
    *annotation_sets: Iterable[Annotation], keep_cui_less: bool = False
) -> list[MergedGoldSpan]:
    """Union annotation sets into deduplicated gold spans.

    Coterminous annotations merge CUI sets. Spans whose merged CUI set is
    empty are CUI-less only; they are dropped unless keep_cui_less is set.
    """
    merged: dict[tuple[str, int, int], set[str]] = {}
    for anns in annotation_sets:
        for ann in anns:
            key = (ann.doc_id, ann.start, ann.end)
            merged.setdefault(key, set()).update(ann.cuis)
    out = []
    for (doc_id, start, end), cuis in sorted(merged.items()):
        if not cuis and not keep_cui_less:
            continue
        out.append(
            MergedGoldSpan(
                doc_id=doc_id,
                start=start,
                end=end,
                cuis=frozenset(cuis),
                cui_less=not cuis,
            )
        )
    return out


@dataclass(frozen=True)
class E2ERow:
    label: str
    gold_count: int
    spans_correct: int
    spans_correct_pct: float | None
    cuis_correct: int
    cuis_correct_pct: float | None
    cui_precision: float | None  # percent; None when spans_correct == 0

    def to_json_dict(self) -> dict:
        return {
            "label": self.label,
            "gold_count": self.gold_count,
            "spans_correct": self.spans_correct,
            "spans_correct_pct": self.spans_correct_pct,
            "cuis_correct": self.cuis_correct,
            "cuis_correct_pct": self.cuis_correct_pct,
            "cui_precision": self.cui_precision,
        }


@dataclass(frozen=True)
class CompoundAnalysis:
    maximal_compound_count: int
    recovered: int
    missed: int
    missed_with_subspan_credit: int

    def to_json_dict(self) -> dict:
        return {
            "maximal_compound_count": self.maximal_compound_count,
            "recovered": self.recovered,
            "missed": self.missed,
            "missed_with_subspan_credit": self.missed_with_subspan_credit,
        }


@dataclass(frozen=True)
class E2EReport:
    mode: str  # lenient | framework
    match_mode: str
    rows: tuple[E2ERow, ...]
    compound: CompoundAnalysis

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "match_mode": self.match_mode,
            "rows": [r.to_json_dict() for r in self.rows],
            "compound": self.compound.to_json_dict(),
        }


def _strictly_contains(
    outer: MergedGoldSpan, inner: MergedGoldSpan
) -> bool:
    return (
        outer.doc_id == inner.doc_id
        and outer.start <= inner.start
        and inner.end <= outer.end
        and (outer.start, outer.end) != (inner.start, inner.end)
    )


def compound_analysis(
    gold: Sequence[MergedGoldSpan],
    preds: Sequence[E2EPrediction],
    match_mode: str = "exact",
) -> CompoundAnalysis:
    """Count maximal compound gold spans and how predictions fared on them."""
    compounds = [
        s
        for s in gold
        if any(_strictly_contains(s, t) for t in gold)
        and not any(_strictly_contains(t, s) for t in gold)
    ]
    recovered = 0
    credited = 0
    for c in compounds:
        if any(_matches(match_mode, c, p) for p in preds):
            recovered += 1
            continue
        subspans = [t for t in gold if _strictly_contains(c, t)]
        if any(
            any(_matches(match_mode, t, p) and p.cui in t.cuis for p in preds)
            for t in subspans
        ):
            credited += 1
    return CompoundAnalysis(
        maximal_compound_count=len(compounds),
        recovered=recovered,
        missed=len(compounds) - recovered,
        missed_with_subspan_credit=credited,
    )


def _pct(n: int, d: int) -> float | None:
    return 100.0 * n / d if d else None


def _score_rows(
    label: str,
    gold: Sequence[MergedGoldSpan],
    preds: Sequence[E2EPrediction],
    match_mode: str,
    lenient: bool,
) -> E2ERow:
    spans_correct = 0
    cuis_correct = 0
    for s in gold:
        if lenient and s.cui_less:
            # Correct unless a concept is claimed on exactly this span; such a
            # span counts as recognized only when it is correct.
            ok = not any(
                _exact(s, p) and p.cui != CUI_LESS for p in preds
            )
            spans_correct += ok
            cuis_correct += ok
            continue
        if lenient:
            recognized = any(_overlaps(s, p) for p in preds)
            correct = any(
                _overlaps(s, p) and p.cui in s.cuis for p in preds
            )
        else:
            recognized = any(_matches(match_mode, s, p) for p in preds)
            correct = any(
                _matches(match_mode, s, p) and p.cui in s.cuis for p in preds
            )
        spans_correct += recognized
        cuis_correct += correct
    return E2ERow(
        label=label,
        gold_count=len(gold),
        spans_correct=spans_correct,
        spans_correct_pct=_pct(spans_correct, len(gold)),
        cuis_correct=cuis_correct,
        cuis_correct_pct=_pct(cuis_correct, len(gold)),
        cui_precision=_pct(cuis_correct, spans_correct),
    )


def _type_rows(
    gold: Sequence[MergedGoldSpan],
    preds: Sequence[E2EPrediction],
    match_mode: str,
    lenient: bool,
    concepts: ConceptSet,
    semtype_min_count: int,
) -> list[E2ERow]:
    by_type: dict[str, list[MergedGoldSpan]] = {}
    for s in gold:
        types: set[str] = set()
        for cui in s.cuis:
            concept = concepts.get(cui)
            if concept is not None:
                types.update(concept.semantic_types)
        for t in types:
            by_type.setdefault(t, []).append(s)
    eligible = [
        (t, spans) for t, spans in by_type.items() if len(spans) >= semtype_min_count
    ]
    eligible.sort(key=lambda ts: (-len(ts[1]), ts[0]))
    return [
        _score_rows(t, spans, preds, match_mode, lenient)
        for t, spans in eligible
    ]


def _build_report(
    mode: str,
    gold: Sequence[MergedGoldSpan],
    preds: Sequence[E2EPrediction],
    match_mode: str,
    concepts: ConceptSet | None,
    semtype_min_count: int,
) -> E2EReport:
    lenient = mode == "lenient"
    rows = [_score_rows("All types", gold, preds, match_mode, lenient)]
    if concepts is not None:
        rows.extend(
            _type_rows(gold, preds, match_mode, lenient, concepts, semtype_min_count)
        )
    cui_bearing = [s for s in gold if s.cuis]
    return E2EReport(
        mode=mode,
        match_mode=match_mode,
        rows=tuple(rows),
        compound=compound_analysis(cui_bearing, preds, match_mode),
    )


def framework_eval(
    gold_a: Iterable[Annotation],
    gold_b: Iterable[Annotation],
    preds: Sequence[E2EPrediction],
    match_mode: str = "exact",
    concepts: ConceptSet | None = None,
    semtype_min_count: int = 50,
) -> E2EReport:
    """Score predictions against the merged union of two annotators' work."""
    if match_mode not in MATCH_MODES:
        raise ValueError(f"unknown match mode {match_mode!r}")
    merged = merge_gold(gold_a, gold_b)
    return _build_report(
        "framework", merged, preds, match_mode, concepts, semtype_min_count
    )


def lenient_report(
    gold: Sequence[MergedGoldSpan],
    preds: Sequence[E2EPrediction],
    concepts: ConceptSet | None = None,
    semtype_min_count: int = 50,
) -> E2EReport:
    """Report-shaped lenient scoring over merged gold spans.

    Lenient matching is overlap-based by nature, so match_mode is fixed.
    """
    return _build_report(
        "lenient", gold, preds, "overlap", concepts, semtype_min_count
    )
