"""Vocabulary loading and the two lookup structures behind suggestions.

A vocabulary is a UTF-8 TSV with one term per row:

    CUI<TAB>term<TAB>preferred(0|1)<TAB>semantic_types(comma-separated)<TAB>source

Rows sharing a CUI merge into one Concept. Two structures are built from the
merged concepts:

  * an exact-lookup table from normalized synonym text to the set of CUIs
    that synonym names (ambiguous terms like "pt" map to several), and
  * an inverted index from stem tokens to the concepts whose synonyms
    contain that stem, for partial matching.

Each concept's "stem document" is the concatenation of the stemmed tokens of
all its synonyms; its length feeds the partial-match ranking. Offsets and
counts everywhere are in Unicode scalar values.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from types import MappingProxyType
from typing import BinaryIO, Iterable, Iterator, Mapping

from . import _porter
from .errors import (
    DuplicatePreferred,
    EmptyVocabulary,
    MalformedRow,
    UnknownCui,
)

# Fixed stop-word list applied before stemming. Deliberately small: clinical
# terms lean on short function words rarely, and a larger list risks eating
# meaningful tokens.
STOP_WORDS = frozenset(
    ["a", "an", "the", "of", "on", "in", "at", "to", "for", "with", "and", "or", "by"]
)

_CUI_RE = re.compile(r"^C\d{7,}$")
_WS_RE = re.compile(r"\s+")
# Maximal runs of Unicode alphanumerics; underscores are separators, digits stay.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def normalize_term(text: str) -> str:
    """Lowercase, collapse whitespace runs to single spaces, strip. Idempotent."""
    return _WS_RE.sub(" ", text.lower()).strip()


@lru_cache(maxsize=65536)
def _stem_cached(token: str) -> str:
    return _porter.stem(token)


def tokenize(text: str) -> list[str]:
    """Lowercased maximal alphanumeric runs, in order, stop words included."""
    return [m.group(0).lower() for m in _TOKEN_RE.finditer(text)]


def stem_tokens(text: str) -> list[str]:
    """Tokenize, drop stop words, Porter-stem each remaining token."""
    return [_stem_cached(t) for t in tokenize(text) if t not in STOP_WORDS]


@dataclass(frozen=True)
class Concept:
    cui: str
    preferred_name: str
    synonyms: frozenset[str]  # raw term strings, preferred name included
    semantic_types: frozenset[str]
    source: str


class ConceptSet:
    """Immutable mapping from CUI to Concept."""

    def __init__(self, concepts: Iterable[Concept]):
        self._by_cui: Mapping[str, Concept] = MappingProxyType(
            {c.cui: c for c in concepts}
        )

    def __len__(self) -> int:
        return len(self._by_cui)

    def __iter__(self) -> Iterator[Concept]:
        return iter(self._by_cui.values())

    def __contains__(self, cui: str) -> bool:
        return cui in self._by_cui

    def get(self, cui: str) -> Concept | None:
        return self._by_cui.get(cui)

    def __getitem__(self, cui: str) -> Concept:
        try:
            return self._by_cui[cui]
        except KeyError:
            raise UnknownCui(cui) from None

    def synonym_count(self, cui: str) -> int:
        """Number of distinct synonym strings, a proxy for concept prevalence."""
        return len(self[cui].synonyms)


def parse_vocab_file(data: bytes | BinaryIO) -> ConceptSet:
    """Parse a vocabulary TSV into merged concepts.

    Raises MalformedRow (with 1-based line number), DuplicatePreferred, or
    EmptyVocabulary.
    """
    raw = data if isinstance(data, bytes) else data.read()
    merged: dict[str, dict] = {}
    for lineno, line in enumerate(raw.split(b"\n"), start=1):
        if line.endswith(b"\r"):
            line = line[:-1]
        if not line:
            continue
        try:
            text = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedRow(lineno, f"invalid UTF-8: {exc.reason}") from None
        cols = text.split("\t")
        if len(cols) != 5:
            raise MalformedRow(
                lineno, f"expected 5 tab-separated columns, found {len(cols)}"
            )
        cui, term, preferred, types_col, source = (c.strip() for c in cols)
        if not _CUI_RE.match(cui):
            raise MalformedRow(lineno, f"invalid CUI {cui!r}")
        if not term:
            raise MalformedRow(lineno, "empty term")
        if preferred not in ("0", "1"):
            raise MalformedRow(lineno, f"preferred flag must be 0 or 1, found {preferred!r}")
        types = [t.strip() for t in types_col.split(",") if t.strip()]

        entry = merged.setdefault(
            cui,
            {"terms": [], "preferred": None, "types": set(), "source": source, "line": lineno},
        )
        if term not in entry["terms"]:
            entry["terms"].append(term)
        entry["types"].update(types)
        if preferred == "1":
            if entry["preferred"] is not None and entry["preferred"] != term:
                raise DuplicatePreferred(cui, entry["preferred"], term)
            entry["preferred"] = term

    if not merged:
        raise EmptyVocabulary("vocabulary contains no concepts")

    concepts = []
    for cui, entry in merged.items():
        if not entry["types"]:
            raise MalformedRow(entry["line"], f"{cui} has no semantic types")
        # A CUI with no row flagged preferred falls back to its first term.
        preferred_name = entry["preferred"] or entry["terms"][0]
        concepts.append(
            Concept(
                cui=cui,
                preferred_name=preferred_name,
                synonyms=frozenset(entry["terms"]),
                semantic_types=frozenset(entry["types"]),
                source=entry["source"],
            )
        )
    return ConceptSet(concepts)


def load_vocab(path: str) -> ConceptSet:
    with open(path, "rb") as fh:
        return parse_vocab_file(fh)


@dataclass(frozen=True)
class IndexStats:
    concept_count: int
    term_count: int
    stem_count: int


@dataclass(frozen=True)
class VocabularyIndex:
    """Read-only lookup structures over a ConceptSet.

    lookup maps normalized synonym text to a frozenset of CUIs. inverted maps
    a stem to a tuple of (cui, concept_stem_count) postings sorted by CUI,
    where concept_stem_count is the total length of that concept's stem
    document. Safe for concurrent readers.
    """

    concepts: ConceptSet
    lookup: Mapping[str, frozenset[str]]
    inverted: Mapping[str, tuple[tuple[str, int], ...]]
    stem_counts: Mapping[str, int]  # cui -> stem document length

    def stats(self) -> IndexStats:
        return IndexStats(
            concept_count=len(self.concepts),
            term_count=len(self.lookup),
            stem_count=len(self.inverted),
        )


def build_index(concepts: ConceptSet) -> VocabularyIndex:
    lookup: dict[str, set[str]] = {}
    stem_counts: dict[str, int] = {}
    postings: dict[str, set[str]] = {}

    for concept in concepts:
        doc_len = 0
        stems_seen: set[str] = set()
        for synonym in sorted(concept.synonyms):
            normalized = normalize_term(synonym)
            if normalized:
                lookup.setdefault(normalized, set()).add(concept.cui)
            stems = stem_tokens(synonym)
            doc_len += len(stems)
            stems_seen.update(stems)
        stem_counts[concept.cui] = doc_len
        for s in stems_seen:
            postings.setdefault(s, set()).add(concept.cui)

    frozen_lookup = {k: frozenset(v) for k, v in sorted(lookup.items())}
    frozen_inverted = {
        s: tuple(sorted((cui, stem_counts[cui]) for cui in cuis))
        for s, cuis in sorted(postings.items())
    }
    return VocabularyIndex(
        concepts=concepts,
        lookup=MappingProxyType(frozen_lookup),
        inverted=MappingProxyType(frozen_inverted),
        stem_counts=MappingProxyType(dict(sorted(stem_counts.items()))),
    )


def load_index(path: str) -> VocabularyIndex:
    """Parse a vocabulary TSV from disk and build its index in one step."""
    return build_index(load_vocab(path))
