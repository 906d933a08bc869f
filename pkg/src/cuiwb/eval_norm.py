"""Normalization evaluation: per-subset accuracy across prediction runs.

Gold spans carry either a non-empty CUI set or the CUI-less marker. A run
predicts at most one label per span; a span with no prediction is scored
incorrect. A prediction is correct when it names any gold CUI, or when both
sides are CUI-less.

Three accuracies are reported per subset, all as percentages. max is the best
single run. avg is the mean over runs. pooled scores a span correct when any
run got it right, so it bounds what an oracle combiner over these runs could
achieve: pooled >= max >= avg always holds.

Subsets slice the test spans by difficulty. Text-based subsets compare
preprocessed text: normalized, with a leading possessive pronoun dropped
("her diabetes" and "diabetes" are the same mention). Frequency-based
subsets count training labels per annotation, the CUI-less marker included,
so a CUI-less test span is unseen only when training has no CUI-less span.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import CUI_LESS, Corpus
from .errors import EmptyTrainingSet, MalformedEvalFile, NoRuns
from .vocabulary import ConceptSet, VocabularyIndex, normalize_term

SUBSET_ORDER = (
    "All",
    "Top100CUI",
    "MultiWord",
    "UnseenText",
    "UnseenCUI",
    "NotDirectMatch",
    "UnpopularCUI",
)

# Subsets that compare against the training collection.
_TRAINING_DEPENDENT = frozenset(
    ["Top100CUI", "UnseenText", "UnseenCUI", "UnpopularCUI"]
)
# Subsets that need resolved span text.
_TEXT_DEPENDENT = frozenset(
    ["MultiWord", "UnseenText", "NotDirectMatch", "UnpopularCUI"]
)

_LEADING_POSSESSIVES = frozenset(
    ["his", "her", "their", "my", "your", "our", "its"]
)

TOP_CUI_COUNT = 100


def preprocess_span_text(text: str) -> str:
    """Normalize, then drop a leading possessive pronoun.

    The pronoun is dropped only when another token follows, so a span that is
    nothing but a pronoun never preprocesses to the empty string.
    """
    normalized = normalize_term(text)
    tokens = normalized.split(" ")
    if len(tokens) > 1 and tokens[0] in _LEADING_POSSESSIVES:
        return " ".join(tokens[1:])
    return normalized


@dataclass(frozen=True)
class GoldSpan:
    span_id: str
    doc_id: str
    start: int
    end: int
    gold_cuis: frozenset[str]
    cui_less: bool
    text: str = ""  # empty when no corpus was supplied to resolve it

    def labels(self) -> frozenset[str]:
        return frozenset([CUI_LESS]) if self.cui_less else self.gold_cuis


@dataclass(frozen=True)
class NormRun:
    system_id: str
    predictions: Mapping[str, str]  # span_id -> CUI or CUI-less


@dataclass(frozen=True)
class SubsetAssignment:
    """Which test spans fall in which subsets.

    `computed` lists the subsets that could actually be evaluated with the
    inputs at hand; members is keyed by subset name with span_id sets.
    """

    computed: tuple[str, ...]
    members: Mapping[str, frozenset[str]]
    top_cuis: frozenset[str]

    def __contains__(self, subset: str) -> bool:
        return subset in self.members


def assign_subsets(
    train: Sequence[GoldSpan],
    test: Sequence[GoldSpan],
    idx: VocabularyIndex | None = None,
    subsets: Sequence[str] | None = None,
) -> SubsetAssignment:
    """Compute subset membership for the test spans.

    With subsets=None every computable subset is produced, and training-
    dependent ones raise EmptyTrainingSet when train is empty. Explicitly
    requested subsets raise ValueError when their inputs are missing.
    """
    explicit = subsets is not None
    requested = list(subsets) if explicit else list(SUBSET_ORDER)
    for name in requested:
        if name not in SUBSET_ORDER:
            raise ValueError(f"unknown subset {name!r}")

    text_ok = all(s.text for s in train) and all(s.text for s in test)

    selected: list[str] = []
    for name in requested:
        if name in _TEXT_DEPENDENT and not text_ok:
            if explicit:
                raise ValueError(f"subset {name} needs resolved span text")
            continue
        if name == "NotDirectMatch" and idx is None:
            if explicit:
                raise ValueError("subset NotDirectMatch needs a vocabulary index")
            continue
        selected.append(name)

    if not train and any(s in _TRAINING_DEPENDENT for s in selected):
        raise EmptyTrainingSet(
            "training spans required for "
            + ", ".join(s for s in selected if s in _TRAINING_DEPENDENT)
        )

    train_pp = [preprocess_span_text(s.text) for s in train]
    test_pp = {s.span_id: preprocess_span_text(s.text) for s in test}

    label_counts: Counter[str] = Counter()
    for s in train:
        label_counts.update(s.labels())
    ranked = sorted(
        (c for c in label_counts if c != CUI_LESS),
        key=lambda c: (-label_counts[c], c),
    )
    top_cuis = frozenset(ranked[:TOP_CUI_COUNT])
    train_labels = frozenset(label_counts)
    train_texts = frozenset(train_pp)

    text_label_counts: dict[str, Counter[str]] = {}
    for s, pp in zip(train, train_pp):
        text_label_counts.setdefault(pp, Counter()).update(s.labels())

    members: dict[str, frozenset[str]] = {}
    for name in selected:
        members[name] = frozenset(
            s.span_id
            for s in test
            if _in_subset(name, s, test_pp[s.span_id], top_cuis, train_labels,
                          train_texts, text_label_counts, idx)
        )

    return SubsetAssignment(
        computed=tuple(selected), members=members, top_cuis=top_cuis
    )


def _in_subset(
    name: str,
    span: GoldSpan,
    pp: str,
    top_cuis: frozenset[str],
    train_labels: frozenset[str],
    train_texts: frozenset[str],
    text_label_counts: dict[str, Counter[str]],
    idx: VocabularyIndex | None,
) -> bool:
    if name == "All":
        return True
    if name == "Top100CUI":
        return any(c in top_cuis for c in span.gold_cuis)
    if name == "MultiWord":
        return len(pp.split(" ")) >= 2
    if name == "UnseenText":
        return pp not in train_texts
    if name == "UnseenCUI":
        return not (span.labels() & train_labels)
    if name == "NotDirectMatch":
        assert idx is not None
        return pp not in idx.lookup
    if name == "UnpopularCUI":
        counts = text_label_counts.get(pp)
        if counts is None:
            return False
        gold = span.labels()
        gold_best = max((counts[g] for g in gold), default=0)
        return any(
            n > gold_best for label, n in counts.items() if label not in gold
        )
    raise ValueError(name)


@dataclass(frozen=True)
class SubsetRow:
    name: str
    examples: int
    max_acc: float | None
    avg_acc: float | None
    pooled_acc: float | None

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "examples": self.examples,
            "max_acc": self.max_acc,
            "avg_acc": self.avg_acc,
            "pooled_acc": self.pooled_acc,
        }


@dataclass(frozen=True)
class SystemScore:
    system_id: str
    correct: int
    total: int
    accuracy: float | None

    def to_json_dict(self) -> dict:
        return {
            "system_id": self.system_id,
            "correct": self.correct,
            "total": self.total,
            "accuracy": self.accuracy,
        }


@dataclass(frozen=True)
class NormEvalReport:
    subsets: tuple[SubsetRow, ...]
    semantic_types: tuple[SubsetRow, ...]
    systems: tuple[SystemScore, ...]
    unknown_span_ids: Mapping[str, tuple[str, ...]]

    def to_json_dict(self) -> dict:
        return {
            "subsets": [r.to_json_dict() for r in self.subsets],
            "semantic_types": [r.to_json_dict() for r in self.semantic_types],
            "systems": [s.to_json_dict() for s in self.systems],
            "unknown_span_ids": {
                k: list(v) for k, v in sorted(self.unknown_span_ids.items())
            },
        }


def _is_correct(span: GoldSpan, prediction: str | None) -> bool:
    if prediction is None:
        return False
    if span.cui_less:
        return prediction == CUI_LESS
    return prediction in span.gold_cuis


def _row(
    name: str,
    span_ids: Sequence[str],
    correct_by_system: Mapping[str, set[str]],
    order: Sequence[str],
) -> SubsetRow:
    n = len(span_ids)
    if n == 0:
        return SubsetRow(name, 0, None, None, None)
    accs = [
        100.0 * sum(1 for s in span_ids if s in correct_by_system[sys]) / n
        for sys in order
    ]
    pooled_hits = sum(
        1
        for s in span_ids
        if any(s in correct_by_system[sys] for sys in order)
    )
    return SubsetRow(
        name,
        n,
        max(accs),
        sum(accs) / len(accs),
        100.0 * pooled_hits / n,
    )


def evaluate_norm(
    gold: Sequence[GoldSpan],
    runs: Sequence[NormRun],
    assignment: SubsetAssignment,
    concepts: ConceptSet | None = None,
    semtype_min_count: int = 50,
) -> NormEvalReport:
    """Score runs against gold spans over the assigned subsets.

    Semantic-type rows are produced only when a concept set is supplied; a
    span counts toward every semantic type of every gold CUI it carries, and
    types with fewer than semtype_min_count spans are dropped.
    """
    if not runs:
        raise NoRuns("at least one prediction run is required")

    order = sorted(r.system_id for r in runs)
    if len(set(order)) != len(order):
        raise ValueError("duplicate system ids")
    by_id = {r.system_id: r for r in runs}

    gold_ids = [s.span_id for s in gold]
    gold_id_set = set(gold_ids)

    correct_by_system: dict[str, set[str]] = {}
    unknown: dict[str, tuple[str, ...]] = {}
    for sys in order:
        run = by_id[sys]
        correct_by_system[sys] = {
            s.span_id
            for s in gold
            if _is_correct(s, run.predictions.get(s.span_id))
        }
        extra = sorted(set(run.predictions) - gold_id_set)
        if extra:
            unknown[sys] = tuple(extra)

    subset_rows = [
        _row(
            name,
            [s for s in gold_ids if s in assignment.members[name]],
            correct_by_system,
            order,
        )
        for name in assignment.computed
    ]

    type_rows: list[SubsetRow] = []
    if concepts is not None:
        spans_by_type: dict[str, list[str]] = {}
        for s in gold:
            types: set[str] = set()
            for cui in s.gold_cuis:
                concept = concepts.get(cui)
                if concept is not None:
                    types.update(concept.semantic_types)
            for t in types:
                spans_by_type.setdefault(t, []).append(s.span_id)
        eligible = [
            (t, ids)
            for t, ids in spans_by_type.items()
            if len(ids) >= semtype_min_count
        ]
        eligible.sort(key=lambda ti: (-len(ti[1]), ti[0]))
        type_rows = [
            _row(t, ids, correct_by_system, order) for t, ids in eligible
        ]

    systems = tuple(
        SystemScore(
            sys,
            len(correct_by_system[sys]),
            len(gold_ids),
            100.0 * len(correct_by_system[sys]) / len(gold_ids) if gold_ids else None,
        )
        for sys in order
    )

    return NormEvalReport(
        subsets=tuple(subset_rows),
        semantic_types=tuple(type_rows),
        systems=systems,
        unknown_span_ids=unknown,
    )


def load_spans_tsv(data: bytes, corpus: Corpus | None = None) -> list[GoldSpan]:
    """Parse a gold-spans TSV:

        span_id<TAB>doc_id<TAB>start<TAB>end<TAB>gold_cuis

    gold_cuis is comma-separated CUIs or the literal CUI-less. When a corpus
    is supplied, span text is resolved from the referenced document.
    """
    spans: list[GoldSpan] = []
    seen: set[str] = set()
    for lineno, line in enumerate(data.split(b"\n"), start=1):
        if line.endswith(b"\r"):
            line = line[:-1]
        if not line:
            continue
        try:
            text = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedEvalFile(lineno, f"invalid UTF-8: {exc.reason}") from None
        cols = text.split("\t")
        if len(cols) != 5:
            raise MalformedEvalFile(
                lineno, f"expected 5 tab-separated columns, found {len(cols)}"
            )
        span_id, doc_id, start_s, end_s, cuis_col = (c.strip() for c in cols)
        if not span_id:
            raise MalformedEvalFile(lineno, "empty span_id")
        if span_id in seen:
            raise MalformedEvalFile(lineno, f"duplicate span_id {span_id}")
        seen.add(span_id)
        try:
            start, end = int(start_s), int(end_s)
        except ValueError:
            raise MalformedEvalFile(lineno, "offsets must be integers") from None
        if start < 0 or end <= start:
            raise MalformedEvalFile(lineno, f"invalid offsets [{start}, {end})")
        labels = [c.strip() for c in cuis_col.split(",") if c.strip()]
        if not labels:
            raise MalformedEvalFile(lineno, "empty gold_cuis")
        cui_less = labels == [CUI_LESS]
        if CUI_LESS in labels and not cui_less:
            raise MalformedEvalFile(
                lineno, "CUI-less cannot be combined with CUIs"
            )
        span_text = ""
        if corpus is not None:
            doc = corpus.documents.get(doc_id)
            if doc is None:
                raise MalformedEvalFile(lineno, f"unknown document {doc_id}")
            if end > len(doc.text):
                raise MalformedEvalFile(
                    lineno, f"offsets [{start}, {end}) exceed document length"
                )
            span_text = doc.text[start:end]
        spans.append(
            GoldSpan(
                span_id=span_id,
                doc_id=doc_id,
                start=start,
                end=end,
                gold_cuis=frozenset() if cui_less else frozenset(labels),
                cui_less=cui_less,
                text=span_text,
            )
        )
    return spans


def load_pred_tsv(data: bytes, system_id: str) -> NormRun:
    """Parse a predictions TSV: span_id<TAB>cui (CUI-less allowed)."""
    predictions: dict[str, str] = {}
    for lineno, line in enumerate(data.split(b"\n"), start=1):
        if line.endswith(b"\r"):
            line = line[:-1]
        if not line:
            continue
        try:
            text = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedEvalFile(lineno, f"invalid UTF-8: {exc.reason}") from None
        cols = text.split("\t")
        if len(cols) != 2:
            raise MalformedEvalFile(
                lineno, f"expected 2 tab-separated columns, found {len(cols)}"
            )
        span_id, cui = (c.strip() for c in cols)
        if not span_id or not cui:
            raise MalformedEvalFile(lineno, "empty field")
        if span_id in predictions:
            raise MalformedEvalFile(lineno, f"duplicate prediction for {span_id}")
        predictions[span_id] = cui
    return NormRun(system_id=system_id, predictions=predictions)
