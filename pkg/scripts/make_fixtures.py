"""Regenerate the files under fixtures/.

Builds the toy corpus through the public API so every invariant is enforced
at authoring time, then writes the files and prints the frozen values the
test suite pins (span offsets, stats, agreement numbers).

Usage: python scripts/make_fixtures.py
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path

from cuiwb import (
    Annotation,
    Corpus,
    Document,
    agreement_report,
    corpus_stats,
    export_corpus,
    lint_corpus,
    load_index,
)

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

TS = datetime(2026, 8, 1, 12, 0, 0, tzinfo=timezone.utc)


def span(text: str, needle: str, occurrence: int = 0) -> tuple[int, int]:
    """Offsets of the nth occurrence of needle in text."""
    at = -1
    for _ in range(occurrence + 1):
        at = text.index(needle, at + 1)
    return at, at + len(needle)


def ann(num: int, doc: Document, needle: str, cuis: set[str],
        annotator: str, *, occurrence: int = 0, cui_less: bool = False,
        status: str = "accepted") -> Annotation:
    start, end = span(doc.text, needle, occurrence)
    return Annotation(
        id=f"a{num:03d}", doc_id=doc.id, start=start, end=end,
        cuis=frozenset(cuis), cui_less=cui_less, annotator_id=annotator,
        status=status, created_at=TS,
    )


def build_toy_corpus() -> Corpus:
    corpus = Corpus()
    d1 = Document(
        id="note-001",
        text=("Pt admitted with severe asthma exacerbation. "
              "He was jaundiced on exam. Asthma noted previously."),
        note_type="progress", section="hpi",
    )
    d2 = Document(
        id="note-002",
        text=("Chest pain resolved. Plan: physical therapy. "
              "Patient remains jaundiced."),
        note_type="progress", section="plan",
    )
    d3 = Document(
        id="note-003",
        text="Prothrombin time pending. Physical therapy consult placed.",
        note_type="lab", section=None,
    )
    for d in (d1, d2, d3):
        corpus.add_document(d)

    entries = [
        ann(1, d1, "severe asthma exacerbation", {"C0038218"}, "ann1"),
        ann(2, d1, "severe", {"C0205082"}, "ann1"),
        ann(3, d1, "asthma", {"C0004096"}, "ann1"),
        ann(4, d1, "asthma exacerbation", {"C0349790"}, "ann1"),
        ann(5, d1, "jaundiced", {"C0022346", "C0474426"}, "ann1"),
        ann(6, d2, "Chest pain", set(), "ann1", cui_less=True),
        ann(7, d2, "Chest", {"C0817096"}, "ann1"),
        ann(8, d2, "pain", {"C0030193"}, "ann1"),
        ann(9, d2, "jaundiced", {"C0022346"}, "ann1"),
        ann(10, d2, "Chest pain", {"C0008031"}, "ann2"),
        ann(11, d2, "physical therapy", {"C0949766"}, "ann2"),
        ann(12, d2, "jaundiced", {"C0022346", "C0474426"}, "ann2"),
        ann(13, d3, "Prothrombin time", {"C0033707"}, "autotag",
            status="proposed"),
        ann(14, d3, "Physical therapy", {"C0949766"}, "autotag",
            status="rejected"),
    ]
    for a in entries:
        corpus.add_annotation(a)
        print(f"{a.id} {a.doc_id} [{a.start},{a.end}) {sorted(a.cuis) or 'CUI-less'}"
              f" {a.annotator_id} {a.status}")
    return corpus


def build_eval_fixture() -> None:
    out = FIXTURES / "eval_norm"
    out.mkdir(parents=True, exist_ok=True)

    e0 = Document(
        id="e0",
        text=("Asthma exacerbation noted. Asthma improving. "
              "Severe asthma exacerbation resolved. Prothrombin time checked. "
              "Chest pain denied. No chest pain today."),
    )
    e1 = Document(
        id="e1",
        text=("Severe asthma exacerbation today. Asthma stable. "
              "Chest pain resolved. PT completed."),
    )
    corpus = Corpus()
    corpus.add_document(e0)
    corpus.add_document(e1)
    (out / "corpus.json").write_bytes(export_corpus(corpus))

    train = [
        ("t1", e0, "Asthma exacerbation", 0, "C0349790"),
        ("t2", e0, "Asthma", 1, "C0004096"),
        ("t3", e0, "Severe asthma exacerbation", 0, "C0038218"),
        ("t4", e0, "Prothrombin time", 0, "C0033707"),
        ("t5", e0, "Chest pain", 0, "C0008031"),
        ("t6", e0, "chest pain", 0, "C0008031"),
    ]
    gold = [
        ("s1", e1, "Severe asthma exacerbation", 0, "C0038218"),
        ("s2", e1, "Asthma", 0, "C0004096"),
        ("s3", e1, "Chest pain", 0, "C0008031"),
        ("s4", e1, "PT", 0, "C0033707"),
    ]
    for name, rows in (("train_spans.tsv", train), ("gold_spans.tsv", gold)):
        lines = []
        for span_id, doc, needle, occ, cuis in rows:
            start, end = span(doc.text, needle, occ)
            lines.append(f"{span_id}\t{doc.id}\t{start}\t{end}\t{cuis}")
            print(f"{name} {span_id} [{start},{end}) {doc.text[start:end]!r}")
        (out / name).write_text("\n".join(lines) + "\n", encoding="utf-8")

    preds = {
        "sys1.tsv": [("s1", "C0038218"), ("s2", "C0004096"),
                     ("s3", "C0008031"), ("s4", "C0949766")],
        "sys2.tsv": [("s1", "C0038218"), ("s2", "C0349790"),
                     ("s4", "C0033707")],
        "sys3.tsv": [("s1", "C0038218"), ("s2", "C0004096"),
                     ("s3", "C0022346"), ("s4", "CUI-less")],
    }
    for name, rows in preds.items():
        body = "".join(f"{sid}\t{cui}\n" for sid, cui in rows)
        (out / name).write_text(body, encoding="utf-8")


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    corpus = build_toy_corpus()
    (FIXTURES / "toy_corpus.json").write_bytes(export_corpus(corpus))

    idx = load_index(FIXTURES / "toy_vocab.tsv")
    print("\nlint findings:")
    for f in lint_corpus(corpus, idx):
        print(f"  {f.rule} {f.severity} {f.doc_id} [{f.start},{f.end})"
              f" ann={f.annotation_id} :: {f.message}")

    stats = corpus_stats(corpus)
    print("\nstats:")
    for r in stats.rows:
        print(f"  {r.doc_id} {r.annotator_id} spans={r.span_count}"
              f" cuis={r.unique_cui_count}")
    print(f"  totals docs={stats.document_count}"
          f" annotators={stats.annotator_count} spans={stats.span_count}"
          f" cuis={stats.unique_cui_count}")

    rep = agreement_report(corpus, "ann1", "ann2")
    print("\nagreement ann1/ann2:")
    print(json.dumps(rep.to_json_dict(), indent=2))

    build_eval_fixture()


if __name__ == "__main__":
    main()
