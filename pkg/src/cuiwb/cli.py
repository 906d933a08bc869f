"""Command line interface.

Every reporting subcommand takes --format table|json. Table output is
deterministic byte for byte; json output carries exactly the object the
corresponding service endpoint would return. Exit codes: 0 on success, 1 when
validation produced error-severity findings, 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .agreement import AgreementReport, agreement_report
from .corpus import (
    Corpus,
    CorpusStats,
    LintFinding,
    corpus_stats,
    import_corpus,
    lint_corpus,
)
from .errors import WorkbenchError
from .eval_e2e import (
    E2EReport,
    framework_eval,
    lenient_report,
    load_predictions_jsonl,
    merge_gold,
)
from .eval_norm import (
    NormEvalReport,
    assign_subsets,
    evaluate_norm,
    load_pred_tsv,
    load_spans_tsv,
)
from .store import FileStore
from .suggestion import SuggestionResult, suggest
from .tables import fmt_pct, fmt_ratio, render_table
from .vocabulary import build_index, load_vocab

USAGE_EXIT = 2
FINDINGS_EXIT = 1


def _print_json(payload) -> None:
    print(json.dumps(payload, indent=2, ensure_ascii=False))


def _read_file(path: str) -> bytes:
    return Path(path).read_bytes()


def _load_corpus_file(path: str) -> Corpus:
    return import_corpus(_read_file(path))


def cmd_vocab_check(args: argparse.Namespace) -> int:
    idx = build_index(load_vocab(args.input))
    stats = idx.stats()
    if args.format == "json":
        _print_json(
            {
                "concept_count": stats.concept_count,
                "term_count": stats.term_count,
                "stem_count": stats.stem_count,
            }
        )
    else:
        rows = [
            ["concepts", str(stats.concept_count)],
            ["terms", str(stats.term_count)],
            ["stems", str(stats.stem_count)],
        ]
        print(render_table(["metric", "value"], rows, ["l", "r"]))
    return 0


def cmd_suggest(args: argparse.Namespace) -> int:
    idx = build_index(load_vocab(args.vocab))
    result = suggest(idx, args.query, args.k)
    if args.format == "json":
        _print_json(result.to_json_dict())
        return 0
    print(_render_suggestions(result))
    return 0


def _render_suggestions(result: SuggestionResult) -> str:
    headers = ["kind", "cui", "name", "types", "synonyms", "matched", "stems"]
    rows = []
    for kind, items in (("direct", result.direct), ("partial", result.partial)):
        for s in items:
            rows.append(
                [
                    kind,
                    s.cui,
                    s.preferred_name,
                    ",".join(s.semantic_types),
                    str(s.synonym_count),
                    str(s.matched_stem_count),
                    str(s.concept_stem_count),
                ]
            )
    return render_table(headers, rows, ["l", "l", "l", "l", "r", "r", "r"])


def _render_findings(findings: list[LintFinding]) -> str:
    headers = ["rule", "severity", "doc", "annotation", "start", "end", "message"]
    rows = [
        [
            f.rule,
            f.severity,
            f.doc_id or "-",
            f.annotation_id or "-",
            "-" if f.start is None else str(f.start),
            "-" if f.end is None else str(f.end),
            f.message,
        ]
        for f in findings
    ]
    return render_table(headers, rows, ["l", "l", "l", "l", "r", "r", "l"])


def cmd_corpus_validate(args: argparse.Namespace) -> int:
    idx = build_index(load_vocab(args.vocab))
    corpus = _load_corpus_file(args.corpus)
    findings = lint_corpus(corpus, idx)
    if args.format == "json":
        _print_json({"findings": [f.to_json_dict() for f in findings]})
    else:
        print(_render_findings(findings))
    has_errors = any(f.severity == "error" for f in findings)
    return FINDINGS_EXIT if has_errors else 0


def _render_stats(stats: CorpusStats) -> str:
    headers = ["doc_id", "annotator", "spans", "unique_cuis"]
    rows = [
        [r.doc_id, r.annotator_id, str(r.span_count), str(r.unique_cui_count)]
        for r in stats.rows
    ]
    rows.append(
        ["(total)", f"({stats.annotator_count})", str(stats.span_count), str(stats.unique_cui_count)]
    )
    return render_table(headers, rows, ["l", "l", "r", "r"])


def cmd_corpus_stats(args: argparse.Namespace) -> int:
    stats = corpus_stats(_load_corpus_file(args.corpus))
    if args.format == "json":
        _print_json(stats.to_json_dict())
    else:
        print(_render_stats(stats))
    return 0


def _render_agreement(report: AgreementReport) -> str:
    summary_rows = [
        ["annotator_a", report.annotator_a],
        ["annotator_b", report.annotator_b],
        ["spans_a", str(report.spans_a)],
        ["spans_b", str(report.spans_b)],
        ["spans_union", str(report.spans_union)],
        ["spans_intersection", str(report.spans_intersection)],
        ["span_jaccard", fmt_ratio(report.span_jaccard)],
        ["concordant_spans", str(report.concordant_spans)],
        ["cui_agreement", fmt_ratio(report.cui_agreement)],
    ]
    out = render_table(["metric", "value"], summary_rows, ["l", "r"])
    if report.per_document:
        doc_rows = [
            [
                d.doc_id,
                str(d.spans_a),
                str(d.spans_b),
                str(d.spans_intersection),
                str(d.spans_union),
                fmt_ratio(d.span_jaccard),
                fmt_ratio(d.cui_agreement),
            ]
            for d in report.per_document
        ]
        out += "\n\n" + render_table(
            ["doc_id", "a", "b", "common", "union", "jaccard", "cui_agreement"],
            doc_rows,
            ["l", "r", "r", "r", "r", "r", "r"],
        )
    return out


def cmd_agreement(args: argparse.Namespace) -> int:
    corpus = _load_corpus_file(args.corpus)
    report = agreement_report(corpus, args.a, args.b)
    if args.format == "json":
        _print_json(report.to_json_dict())
    else:
        print(_render_agreement(report))
    return 0


def _render_norm_report(report: NormEvalReport) -> str:
    headers = ["subset", "examples", "max_acc", "avg_acc", "pooled_acc"]
    rows = [
        [r.name, str(r.examples), fmt_pct(r.max_acc), fmt_pct(r.avg_acc), fmt_pct(r.pooled_acc)]
        for r in report.subsets
    ]
    out = render_table(headers, rows, ["l", "r", "r", "r", "r"])
    if report.semantic_types:
        type_rows = [
            [r.name, str(r.examples), fmt_pct(r.max_acc), fmt_pct(r.avg_acc), fmt_pct(r.pooled_acc)]
            for r in report.semantic_types
        ]
        out += "\n\n" + render_table(
            ["semantic_type", "examples", "max_acc", "avg_acc", "pooled_acc"],
            type_rows,
            ["l", "r", "r", "r", "r"],
        )
    system_rows = [
        [s.system_id, str(s.correct), str(s.total), fmt_pct(s.accuracy)]
        for s in report.systems
    ]
    out += "\n\n" + render_table(
        ["system", "correct", "total", "accuracy"], system_rows, ["l", "r", "r", "r"]
    )
    return out


def cmd_eval_norm(args: argparse.Namespace) -> int:
    corpus = _load_corpus_file(args.corpus) if args.corpus else None
    idx = build_index(load_vocab(args.vocab)) if args.vocab else None
    train = load_spans_tsv(_read_file(args.train), corpus)
    gold = load_spans_tsv(_read_file(args.gold), corpus)
    runs = [
        load_pred_tsv(_read_file(p), Path(p).stem) for p in args.pred
    ]
    assignment = assign_subsets(train, gold, idx)
    report = evaluate_norm(
        gold,
        runs,
        assignment,
        idx.concepts if idx else None,
        semtype_min_count=args.semtype_min,
    )
    if args.format == "json":
        _print_json(report.to_json_dict())
    else:
        print(_render_norm_report(report))
    return 0


def _render_e2e_report(report: E2EReport) -> str:
    headers = [
        "label", "gold", "spans_correct", "spans_pct", "cuis_correct",
        "cuis_pct", "cui_precision",
    ]
    rows = [
        [
            r.label,
            str(r.gold_count),
            str(r.spans_correct),
            fmt_pct(r.spans_correct_pct),
            str(r.cuis_correct),
            fmt_pct(r.cuis_correct_pct),
            fmt_pct(r.cui_precision),
        ]
        for r in report.rows
    ]
    out = render_table(headers, rows, ["l", "r", "r", "r", "r", "r", "r"])
    c = report.compound
    compound_rows = [
        ["maximal_compounds", str(c.maximal_compound_count)],
        ["recovered", str(c.recovered)],
        ["missed", str(c.missed)],
        ["missed_with_subspan_credit", str(c.missed_with_subspan_credit)],
    ]
    out += "\n\n" + render_table(["compound_metric", "value"], compound_rows, ["l", "r"])
    return out


def cmd_eval_e2e(args: argparse.Namespace) -> int:
    corpus = _load_corpus_file(args.gold)
    preds = load_predictions_jsonl(_read_file(args.pred))
    idx = build_index(load_vocab(args.vocab)) if args.vocab else None
    concepts = idx.concepts if idx else None

    gold_all = list(corpus.accepted())
    if args.mode == "framework":
        report = framework_eval(
            gold_all, [], preds, args.match, concepts, args.semtype_min
        )
    else:
        merged = merge_gold(gold_all, keep_cui_less=True)
        report = lenient_report(merged, preds, concepts, args.semtype_min)
    if args.format == "json":
        _print_json(report.to_json_dict())
    else:
        print(_render_e2e_report(report))
    return 0


def cmd_autotag(args: argparse.Namespace) -> int:
    idx = build_index(load_vocab(args.vocab))
    store = FileStore(args.store)
    created = store.autotag(args.doc, idx)
    if args.format == "json":
        _print_json([a.to_json_dict() for a in created])
        return 0
    rows = [
        [a.id, str(a.start), str(a.end), ",".join(sorted(a.cuis))] for a in created
    ]
    print(render_table(["id", "start", "end", "cuis"], rows, ["l", "r", "r", "l"]))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    vocab = args.vocab or os.environ.get("CUIWB_VOCAB")
    store = args.store or os.environ.get("CUIWB_STORE")
    port = args.port if args.port is not None else int(os.environ.get("CUIWB_PORT", "8000"))
    if not vocab or not store:
        print(
            "serve requires --vocab and --store (or CUIWB_VOCAB / CUIWB_STORE)",
            file=sys.stderr,
        )
        return USAGE_EXIT
    app = create_app(vocab, store, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


def _add_format(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--format", choices=["table", "json"], default="table",
        help="output format (default table)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cuiwb", description="Clinical concept annotation workbench"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    vocab = sub.add_parser("vocab", help="vocabulary operations")
    vocab_sub = vocab.add_subparsers(dest="subcommand", required=True)
    check = vocab_sub.add_parser("check", help="parse a vocabulary and print stats")
    check.add_argument("--input", required=True, help="vocabulary TSV path")
    _add_format(check)
    check.set_defaults(func=cmd_vocab_check)

    sugg = sub.add_parser("suggest", help="suggest concepts for a text query")
    sugg.add_argument("--vocab", required=True)
    sugg.add_argument("--query", required=True)
    sugg.add_argument("--k", type=int, default=10)
    _add_format(sugg)
    sugg.set_defaults(func=cmd_suggest)

    corpus = sub.add_parser("corpus", help="corpus operations")
    corpus_sub = corpus.add_subparsers(dest="subcommand", required=True)
    validate = corpus_sub.add_parser("validate", help="lint a corpus file")
    validate.add_argument("--vocab", required=True)
    validate.add_argument("corpus", help="corpus JSON path")
    _add_format(validate)
    validate.set_defaults(func=cmd_corpus_validate)
    stats = corpus_sub.add_parser("stats", help="per-document annotation counts")
    stats.add_argument("corpus", help="corpus JSON path")
    _add_format(stats)
    stats.set_defaults(func=cmd_corpus_stats)

    agree = sub.add_parser("agreement", help="inter-annotator agreement")
    agree.add_argument("--a", required=True, help="first annotator id")
    agree.add_argument("--b", required=True, help="second annotator id")
    agree.add_argument("corpus", help="corpus JSON path")
    _add_format(agree)
    agree.set_defaults(func=cmd_agreement)

    ev = sub.add_parser("eval", help="evaluation")
    ev_sub = ev.add_subparsers(dest="subcommand", required=True)

    norm = ev_sub.add_parser("norm", help="normalization accuracy over runs")
    norm.add_argument("--train", required=True, help="training spans TSV")
    norm.add_argument("--gold", required=True, help="gold spans TSV")
    norm.add_argument(
        "--pred", required=True, action="append", help="prediction TSV (repeatable)"
    )
    norm.add_argument("--semtype-min", type=int, default=50)
    norm.add_argument("--corpus", help="corpus JSON to resolve span text")
    norm.add_argument("--vocab", help="vocabulary TSV for semantic types")
    _add_format(norm)
    norm.set_defaults(func=cmd_eval_norm)

    e2e = ev_sub.add_parser("e2e", help="end-to-end span+CUI evaluation")
    e2e.add_argument("--gold", required=True, help="gold corpus JSON")
    e2e.add_argument("--pred", required=True, help="predictions JSONL")
    e2e.add_argument("--mode", choices=["lenient", "framework"], default="lenient")
    e2e.add_argument("--match", choices=["exact", "overlap"], default="exact")
    e2e.add_argument("--semtype-min", type=int, default=50)
    e2e.add_argument("--vocab", help="vocabulary TSV for semantic types")
    _add_format(e2e)
    e2e.set_defaults(func=cmd_eval_e2e)

    auto = sub.add_parser("autotag", help="propose unambiguous matches in a document")
    auto.add_argument("--vocab", required=True)
    auto.add_argument("--doc", required=True, help="document id")
    auto.add_argument("--store", required=True, help="store directory")
    _add_format(auto)
    auto.set_defaults(func=cmd_autotag)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--vocab", help="vocabulary TSV (or CUIWB_VOCAB)")
    serve.add_argument("--store", help="store directory (or CUIWB_STORE)")
    serve.add_argument("--port", type=int, help="port (or CUIWB_PORT, default 8000)")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--ui", help="directory of built UI assets to serve at /")
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except WorkbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
