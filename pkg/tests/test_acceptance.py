"""Acceptance suite.

One test per acceptance criterion, so `pytest -v` shows one pass/fail line
for each: two frozen arithmetic reproductions, oracle equivalence of both
evaluation reports against independent brute-force scorers on random corpora,
metric order properties over a thousand random instances, suggestion
determinism and recall plus index performance budgets, corpus round-trip
identity, and a crash-after-acknowledge durability drill against the real
server process.

The oracles here re-derive subset membership, merging, matching, and
compound containment from first principles with plain loops and local
helper formulas; they share only the tiny verified primitives (tokenize,
stem, stop words) with the library.
"""

import json
import random
import shutil
import socket
import statistics
import subprocess
import time
from collections import Counter
from datetime import datetime, timedelta, timezone
from pathlib import Path

import httpx
import pytest

from cuiwb import (
    Annotation,
    Corpus,
    Document,
    E2EPrediction,
    FileStore,
    GoldSpan,
    MergedGoldSpan,
    NormRun,
    agreement_report,
    assign_subsets,
    compound_analysis,
    evaluate_norm,
    export_corpus,
    framework_eval,
    import_corpus,
    index_matches,
    lenient_report,
    load_index,
    merge_gold,
    stem_tokens,
    suggest,
)
from cuiwb.errors import DuplicateAnnotation

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
VOCAB = FIXTURES / "toy_vocab.tsv"

CUI_LESS = "CUI-less"
SUBSETS = (
    "All",
    "Top100CUI",
    "MultiWord",
    "UnseenText",
    "UnseenCUI",
    "NotDirectMatch",
    "UnpopularCUI",
)
POSSESSIVES = frozenset(["his", "her", "their", "my", "your", "our", "its"])


# ---------------------------------------------------------------------------
# Reference helpers (independent re-derivations used by the oracles)

def ref_normalize(text):
    return " ".join(text.lower().split())


def ref_preprocess(text):
    normalized = ref_normalize(text)
    tokens = normalized.split(" ")
    if len(tokens) > 1 and tokens[0] in POSSESSIVES:
        return " ".join(tokens[1:])
    return normalized


def ref_span_labels(span):
    return frozenset([CUI_LESS]) if span.cui_less else span.gold_cuis


def parse_vocab_tsv(path):
    """Read the raw vocabulary rows without the library's parser."""
    syn_norms = set()
    cui_types = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        cui, term, _pref, types, _source = line.split("\t")
        syn_norms.add(ref_normalize(term))
        bag = cui_types.setdefault(cui, set())
        bag.update(t for t in types.split(",") if t)
    return syn_norms, cui_types


def concept_stem_sets(path):
    """Per-CUI stem sets computed straight from the vocabulary rows."""
    stems = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        cui, term, _pref, _types, _source = line.split("\t")
        stems.setdefault(cui, set()).update(stem_tokens(term))
    return stems


def query_stems(text):
    return set(stem_tokens(text))


# ---------------------------------------------------------------------------
# Brute-force oracle: normalization report

def oracle_norm_report(train, gold, runs, syn_norms, cui_types, semtype_min):
    order = sorted(r.system_id for r in runs)
    by_id = {r.system_id: r for r in runs}
    gold_ids = [s.span_id for s in gold]
    gold_id_set = set(gold_ids)

    correct = {}
    unknown = {}
    for sys_id in order:
        run = by_id[sys_id]
        hits = set()
        for s in gold:
            pred = run.predictions.get(s.span_id)
            if pred is None:
                continue
            ok = pred == CUI_LESS if s.cui_less else pred in s.gold_cuis
            if ok:
                hits.add(s.span_id)
        correct[sys_id] = hits
        extra = sorted(set(run.predictions) - gold_id_set)
        if extra:
            unknown[sys_id] = list(extra)

    train_pp = [ref_preprocess(t.text) for t in train]
    label_counts = Counter()
    for t in train:
        label_counts.update(ref_span_labels(t))
    ranked = sorted(
        (c for c in label_counts if c != CUI_LESS),
        key=lambda c: (-label_counts[c], c),
    )
    top = set(ranked[:100])
    train_labels = set(label_counts)
    train_texts = set(train_pp)
    per_text = {}
    for t, pp in zip(train, train_pp):
        per_text.setdefault(pp, Counter()).update(ref_span_labels(t))

    members = {name: set() for name in SUBSETS}
    for s in gold:
        pp = ref_preprocess(s.text)
        labels = ref_span_labels(s)
        members["All"].add(s.span_id)
        if any(c in top for c in s.gold_cuis):
            members["Top100CUI"].add(s.span_id)
        if len(pp.split(" ")) >= 2:
            members["MultiWord"].add(s.span_id)
        if pp not in train_texts:
            members["UnseenText"].add(s.span_id)
        if not (labels & train_labels):
            members["UnseenCUI"].add(s.span_id)
        if pp not in syn_norms:
            members["NotDirectMatch"].add(s.span_id)
        counts = per_text.get(pp)
        if counts is not None:
            gold_best = max((counts[g] for g in labels), default=0)
            if any(n > gold_best for lbl, n in counts.items() if lbl not in labels):
                members["UnpopularCUI"].add(s.span_id)

    def row(name, ids):
        n = len(ids)
        if n == 0:
            return {
                "name": name, "examples": 0,
                "max_acc": None, "avg_acc": None, "pooled_acc": None,
            }
        accs = [
            100.0 * sum(1 for i in ids if i in correct[sys_id]) / n
            for sys_id in order
        ]
        pooled = sum(
            1 for i in ids if any(i in correct[sys_id] for sys_id in order)
        )
        return {
            "name": name,
            "examples": n,
            "max_acc": max(accs),
            "avg_acc": sum(accs) / len(accs),
            "pooled_acc": 100.0 * pooled / n,
        }

    subsets = [
        row(name, [i for i in gold_ids if i in members[name]])
        for name in SUBSETS
    ]

    spans_by_type = {}
    for s in gold:
        types = set()
        for cui in s.gold_cuis:
            types.update(cui_types.get(cui, ()))
        for t in types:
            spans_by_type.setdefault(t, []).append(s.span_id)
    eligible = [
        (t, ids) for t, ids in spans_by_type.items() if len(ids) >= semtype_min
    ]
    eligible.sort(key=lambda ti: (-len(ti[1]), ti[0]))
    semantic = [row(t, ids) for t, ids in eligible]

    systems = [
        {
            "system_id": sys_id,
            "correct": len(correct[sys_id]),
            "total": len(gold_ids),
            "accuracy": (
                100.0 * len(correct[sys_id]) / len(gold_ids) if gold_ids else None
            ),
        }
        for sys_id in order
    ]
    return {
        "subsets": subsets,
        "semantic_types": semantic,
        "systems": systems,
        "unknown_span_ids": unknown,
    }


# ---------------------------------------------------------------------------
# Brute-force oracle: end-to-end report

def oracle_e2e_report(mode, gold_a, gold_b, preds, match_mode, cui_types,
                      semtype_min):
    lenient = mode == "lenient"
    eff_match = "overlap" if lenient else match_mode

    pool = {}
    for ann in list(gold_a) + list(gold_b):
        pool.setdefault((ann.doc_id, ann.start, ann.end), set()).update(ann.cuis)
    spans = []
    for key in sorted(pool):
        cuis = frozenset(pool[key])
        if not cuis and not lenient:
            continue
        spans.append((key[0], key[1], key[2], cuis, not cuis))

    def exact(s, p):
        return s[0] == p.doc_id and s[1] == p.start and s[2] == p.end

    def overlaps(s, p):
        return s[0] == p.doc_id and s[1] < p.end and p.start < s[2]

    def matches(s, p):
        return exact(s, p) if eff_match == "exact" else overlaps(s, p)

    def score(label, group):
        spans_c = 0
        cuis_c = 0
        for s in group:
            cuis = s[3]
            if lenient and s[4]:
                ok = not any(exact(s, p) and p.cui != CUI_LESS for p in preds)
                spans_c += ok
                cuis_c += ok
            elif lenient:
                spans_c += any(overlaps(s, p) for p in preds)
                cuis_c += any(overlaps(s, p) and p.cui in cuis for p in preds)
            else:
                spans_c += any(matches(s, p) for p in preds)
                cuis_c += any(matches(s, p) and p.cui in cuis for p in preds)
        n = len(group)
        return {
            "label": label,
            "gold_count": n,
            "spans_correct": spans_c,
            "spans_correct_pct": 100.0 * spans_c / n if n else None,
            "cuis_correct": cuis_c,
            "cuis_correct_pct": 100.0 * cuis_c / n if n else None,
            "cui_precision": 100.0 * cuis_c / spans_c if spans_c else None,
        }

    rows = [score("All types", spans)]
    by_type = {}
    for s in spans:
        types = set()
        for cui in s[3]:
            types.update(cui_types.get(cui, ()))
        for t in types:
            by_type.setdefault(t, []).append(s)
    eligible = [
        (t, group) for t, group in by_type.items() if len(group) >= semtype_min
    ]
    eligible.sort(key=lambda tg: (-len(tg[1]), tg[0]))
    rows.extend(score(t, group) for t, group in eligible)

    cui_bearing = [s for s in spans if s[3]]

    def contains(outer, inner):
        return (
            outer[0] == inner[0]
            and outer[1] <= inner[1]
            and inner[2] <= outer[2]
            and (outer[1], outer[2]) != (inner[1], inner[2])
        )

    compounds = [
        s
        for s in cui_bearing
        if any(contains(s, t) for t in cui_bearing)
        and not any(contains(t, s) for t in cui_bearing)
    ]
    recovered = 0
    credited = 0
    for c in compounds:
        if any(matches(c, p) for p in preds):
            recovered += 1
            continue
        subs = [t for t in cui_bearing if contains(c, t)]
        if any(
            any(matches(t, p) and p.cui in t[3] for p in preds) for t in subs
        ):
            credited += 1

    return {
        "mode": mode,
        "match_mode": eff_match,
        "rows": rows,
        "compound": {
            "maximal_compound_count": len(compounds),
            "recovered": recovered,
            "missed": len(compounds) - recovered,
            "missed_with_subspan_credit": credited,
        },
    }


# ---------------------------------------------------------------------------
# Random-instance generators

NORM_WORDS = [
    "asthma", "severe", "exacerbation", "pt", "chest", "pain", "physical",
    "therapy", "jaundiced", "icterus", "protime", "fever", "cough", "edema",
    "prothrombin", "time", "yellow", "color",
]
NORM_LEADERS = ["", "", "", "her ", "his ", "their ", "the "]
REAL_CUIS = [
    "C0033707", "C0949766", "C1720310", "C0004096", "C0349790", "C0038218",
    "C0205082", "C0022346", "C0474426", "C0008031", "C0817096", "C0030193",
]
FAKE_CUIS = [f"C9{i:06d}" for i in range(8)]
CUI_POOL = REAL_CUIS + FAKE_CUIS
SYSTEM_NAMES = ["zeta", "alpha", "mu", "kappa", "sigma", "beta", "omega"]


def rand_norm_span(rng, span_id):
    text = rng.choice(NORM_LEADERS) + " ".join(
        rng.choice(NORM_WORDS) for _ in range(rng.randint(1, 3))
    )
    roll = rng.random()
    if roll < 0.2:
        cuis, cui_less = frozenset(), True
    elif roll < 0.35:
        cuis, cui_less = frozenset(rng.sample(CUI_POOL, rng.randint(2, 3))), False
    else:
        cuis, cui_less = frozenset([rng.choice(CUI_POOL)]), False
    return GoldSpan(
        span_id=span_id, doc_id="d", start=0, end=1,
        gold_cuis=cuis, cui_less=cui_less, text=text,
    )


def rand_norm_instance(rng, max_spans=200, max_systems=5):
    train = [rand_norm_span(rng, f"t{i}") for i in range(rng.randint(1, 60))]
    gold = [rand_norm_span(rng, f"s{i}") for i in range(rng.randint(1, max_spans))]
    runs = []
    for sys_id in rng.sample(SYSTEM_NAMES, rng.randint(1, max_systems)):
        predictions = {}
        for s in gold:
            roll = rng.random()
            if roll < 0.35:
                predictions[s.span_id] = rng.choice(sorted(s.labels()))
            elif roll < 0.55:
                predictions[s.span_id] = rng.choice(CUI_POOL)
            elif roll < 0.65:
                predictions[s.span_id] = CUI_LESS
        for g in range(rng.randint(0, 2)):
            predictions[f"ghost{g}"] = rng.choice(CUI_POOL)
        runs.append(NormRun(system_id=sys_id, predictions=predictions))
    semtype_min = rng.choice([1, 1, 2, 5, 50])
    return train, gold, runs, semtype_min


E2E_DOCS = ["n1", "n2", "n3"]


def rand_e2e_annotations(rng, prefix, max_count):
    anns = []
    for i in range(rng.randint(0, max_count)):
        start = rng.randrange(0, 40)
        end = start + rng.randrange(1, 8)
        roll = rng.random()
        if roll < 0.15:
            cuis, cui_less = frozenset(), True
        elif roll < 0.3:
            cuis, cui_less = frozenset(rng.sample(CUI_POOL, 2)), False
        else:
            cuis, cui_less = frozenset([rng.choice(CUI_POOL)]), False
        anns.append(
            Annotation(
                id=f"{prefix}{i}", doc_id=rng.choice(E2E_DOCS),
                start=start, end=end, cuis=cuis, cui_less=cui_less,
                annotator_id=prefix,
            )
        )
    return anns


def rand_e2e_preds(rng, anns, max_count):
    preds = []
    for _ in range(rng.randint(0, max_count)):
        if anns and rng.random() < 0.6:
            a = rng.choice(anns)
            doc = a.doc_id
            if rng.random() < 0.6:
                start, end = a.start, a.end
            else:
                start = max(0, a.start - rng.randint(0, 2))
                end = a.end + rng.randint(0, 2)
                if end <= start:
                    end = start + 1
            labels = sorted(a.cuis) or [CUI_LESS]
            cui = rng.choice(labels) if rng.random() < 0.6 else rng.choice(CUI_POOL)
        else:
            doc = rng.choice(E2E_DOCS + ["ghost-doc"])
            start = rng.randrange(0, 45)
            end = start + rng.randrange(1, 8)
            cui = rng.choice(CUI_POOL + [CUI_LESS])
        preds.append(E2EPrediction(doc, start, end, cui))
    return preds


def rand_e2e_instance(rng, max_each=60, max_preds=80):
    gold_a = rand_e2e_annotations(rng, "a", max_each)
    gold_b = rand_e2e_annotations(rng, "b", max_each)
    preds = rand_e2e_preds(rng, gold_a + gold_b, max_preds)
    match_mode = rng.choice(["exact", "overlap"])
    semtype_min = rng.choice([1, 1, 2, 5, 50])
    return gold_a, gold_b, preds, match_mode, semtype_min


# ---------------------------------------------------------------------------
# The acceptance criteria

def test_span_jaccard_reproduction():
    """1152 shared + 136 + 283 single-annotator spans give Jaccard 0.733."""
    started = time.perf_counter()
    corpus = Corpus()
    corpus.add_document(Document(id="d", text="x" * 3400))

    def add(annotator, serial, start):
        corpus.add_annotation(
            Annotation(
                id=f"{annotator}{serial}", doc_id="d", start=start,
                end=start + 1, cuis=frozenset(["C0004096"]), cui_less=False,
                annotator_id=annotator,
            )
        )

    for i in range(1152):
        add("a", i, 2 * i)
        add("b", i, 2 * i)
    for i in range(136):
        add("a", 2000 + i, 2400 + 2 * i)
    for i in range(283):
        add("b", 2000 + i, 2800 + 2 * i)

    report = agreement_report(corpus, "a", "b")
    elapsed = time.perf_counter() - started

    assert report.spans_a == 1288
    assert report.spans_b == 1435
    assert report.spans_union == 1571
    assert report.spans_intersection == 1152
    assert report.span_jaccard == pytest.approx(0.733, abs=1e-3)
    assert elapsed < 1.0, f"took {elapsed:.3f}s"


def test_compound_count_arithmetic():
    """174 maximal compounds, 74 recovered, 54 of 100 missed get credit."""
    started = time.perf_counter()
    gold = []
    preds = []
    for i in range(174):
        base = 10 * i
        outer_cui = f"C{500000 + i:07d}"
        inner_cui = f"C{600000 + i:07d}"
        gold.append(MergedGoldSpan("d", base, base + 6, frozenset([outer_cui])))
        gold.append(MergedGoldSpan("d", base, base + 3, frozenset([inner_cui])))
        if i < 74:
            # Recovery needs only the span; give it an unrelated concept.
            preds.append(E2EPrediction("d", base, base + 6, "C0414141"))
        elif i < 74 + 54:
            preds.append(E2EPrediction("d", base, base + 3, inner_cui))

    result = compound_analysis(gold, preds, "exact")
    elapsed = time.perf_counter() - started

    assert result.maximal_compound_count == 174
    assert result.recovered == 74
    assert result.missed == 100
    assert result.missed_with_subspan_credit == 54
    assert elapsed < 1.0, f"took {elapsed:.3f}s"


def test_reports_match_brute_force_oracles():
    """Both report types equal independent scorers on 50 random corpora."""
    idx = load_index(str(VOCAB))
    syn_norms, cui_types = parse_vocab_tsv(VOCAB)
    started = time.perf_counter()

    for seed in range(50):
        rng = random.Random(1000 + seed)

        train, gold, runs, semtype_min = rand_norm_instance(rng)
        assignment = assign_subsets(train, gold, idx)
        report = evaluate_norm(
            gold, runs, assignment, idx.concepts, semtype_min_count=semtype_min
        )
        expected = oracle_norm_report(
            train, gold, runs, syn_norms, cui_types, semtype_min
        )
        assert report.to_json_dict() == expected, f"norm mismatch at seed {seed}"

        gold_a, gold_b, preds, match_mode, e2e_min = rand_e2e_instance(rng)
        framework = framework_eval(
            gold_a, gold_b, preds, match_mode, idx.concepts, e2e_min
        )
        assert framework.to_json_dict() == oracle_e2e_report(
            "framework", gold_a, gold_b, preds, match_mode, cui_types, e2e_min
        ), f"framework mismatch at seed {seed}"

        merged = merge_gold(gold_a, gold_b, keep_cui_less=True)
        lenient = lenient_report(merged, preds, idx.concepts, e2e_min)
        assert lenient.to_json_dict() == oracle_e2e_report(
            "lenient", gold_a, gold_b, preds, "overlap", cui_types, e2e_min
        ), f"lenient mismatch at seed {seed}"

    elapsed = time.perf_counter() - started
    assert elapsed < 30.0, f"took {elapsed:.3f}s"


def test_metric_order_invariants():
    """pooled >= max >= avg, cui% <= span%, unpopular implies seen text."""
    idx = load_index(str(VOCAB))
    violations = []

    for seed in range(1000):
        rng = random.Random(2000 + seed)

        train, gold, runs, semtype_min = rand_norm_instance(
            rng, max_spans=25, max_systems=3
        )
        assignment = assign_subsets(train, gold, idx)
        report = evaluate_norm(
            gold, runs, assignment, idx.concepts, semtype_min_count=semtype_min
        )
        # Averaging ties can land one ULP above the shared maximum; any
        # real ordering violation is at least 100/(examples*systems) wide.
        eps = 1e-9
        for row in report.subsets + report.semantic_types:
            if row.examples == 0:
                continue
            if not (row.pooled_acc >= row.max_acc - eps >= row.avg_acc - 2 * eps):
                violations.append((seed, "accuracy order", row.name))
        unpopular = assignment.members.get("UnpopularCUI", frozenset())
        unseen = assignment.members.get("UnseenText", frozenset())
        if unpopular & unseen:
            violations.append((seed, "unpopular overlaps unseen text", ""))

        gold_a, gold_b, preds, match_mode, e2e_min = rand_e2e_instance(
            rng, max_each=15, max_preds=25
        )
        framework = framework_eval(
            gold_a, gold_b, preds, match_mode, idx.concepts, e2e_min
        )
        merged = merge_gold(gold_a, gold_b, keep_cui_less=True)
        lenient = lenient_report(merged, preds, idx.concepts, e2e_min)
        for report_e2e in (framework, lenient):
            for row in report_e2e.rows:
                if row.cuis_correct > row.spans_correct:
                    violations.append((seed, "cui count order", row.label))
                if (
                    row.cuis_correct_pct is not None
                    and row.spans_correct_pct is not None
                    and row.cuis_correct_pct > row.spans_correct_pct
                ):
                    violations.append((seed, "cui pct order", row.label))

    assert violations == [], f"{len(violations)} violations: {violations[:5]}"


def _synthetic_vocab(tmp_path, n_concepts=12500, terms_per=4):
    rng = random.Random(7)
    syllables = [
        "car", "di", "o", "vas", "neph", "ro", "derm", "itis", "gast", "tro",
        "pulm", "hep", "at", "ic", "osis", "emia", "algia", "neur", "myo",
        "path", "scler", "ten", "don", "bronch", "pleur", "ren", "cut", "ost",
        "arthr", "chondr", "cyt", "leuk", "erythr", "thromb", "phleb",
    ]
    pool = [
        "".join(rng.choice(syllables) for _ in range(rng.randint(2, 4)))
        for _ in range(600)
    ]
    types = [f"Group {chr(65 + i)}" for i in range(10)]
    lines = []
    for i in range(n_concepts):
        cui = f"C{i:07d}"
        for j in range(terms_per):
            term = " ".join(rng.choice(pool) for _ in range(rng.randint(1, 3)))
            lines.append(
                f"{cui}\t{term}\t{'1' if j == 0 else '0'}\t{rng.choice(types)}\tSYN"
            )
    path = tmp_path / "synthetic_vocab.tsv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    queries = [
        " ".join(rng.choice(pool) for _ in range(rng.randint(1, 2)))
        for _ in range(200)
    ]
    return path, queries


def test_suggestion_determinism_recall_and_latency(tmp_path):
    """100 rebuilds rank identically; recall is exhaustive; budgets hold."""
    queries = [
        "pt", "asthma", "severe asthma exacerbation", "physical therapy",
        "jaundiced", "chest pain", "posterior tibial pulse", "icterus protime",
        "the pain of asthma", "unrelatedword",
    ]

    # Determinism: rebuild from scratch and serialize the full rankings.
    blobs = set()
    for _ in range(100):
        idx = load_index(str(VOCAB))
        payload = [suggest(idx, q, 12).to_json_dict() for q in queries]
        payload.append(
            [s.to_json_dict() for q in queries for s in index_matches(idx, q, 100)]
        )
        blobs.add(json.dumps(payload, sort_keys=True))
    assert len(blobs) == 1, "rankings differ across rebuilds"

    # Recall: every concept sharing a stem with the query appears before
    # any truncation, per exhaustive scoring over the raw vocabulary rows.
    idx = load_index(str(VOCAB))
    stems_by_cui = concept_stem_sets(VOCAB)
    for q in queries:
        wanted = {
            cui for cui, stems in stems_by_cui.items() if stems & query_stems(q)
        }
        got = {s.cui for s in index_matches(idx, q, len(stems_by_cui))}
        assert got == wanted, f"recall mismatch for {q!r}"

    # Budgets on a 50,000-term synthetic vocabulary.
    big_path, big_queries = _synthetic_vocab(tmp_path)
    started = time.perf_counter()
    big_idx = load_index(str(big_path))
    build_elapsed = time.perf_counter() - started
    assert build_elapsed < 5.0, f"index build took {build_elapsed:.2f}s"

    latencies = []
    for q in big_queries:
        t0 = time.perf_counter()
        suggest(big_idx, q, 10)
        latencies.append(time.perf_counter() - t0)
    median = statistics.median(latencies)
    assert median < 0.005, f"median query latency {median * 1000:.2f}ms"


def _random_datetime(rng):
    return datetime(
        2020 + rng.randint(0, 6), rng.randint(1, 12), rng.randint(1, 28),
        rng.randint(0, 23), rng.randint(0, 59), rng.randint(0, 59),
        rng.choice([0, 123456]),
        tzinfo=timezone(timedelta(hours=rng.randint(-11, 11))),
    )


def _random_corpus(rng, serial):
    corpus = Corpus()
    docs = []
    alphabet = "abcd efgh é🜁 xyz"
    for d in range(rng.randint(1, 4)):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randint(12, 40)))
        doc_id = f"doc-{serial}-{d}"
        corpus.add_document(
            Document(
                id=doc_id, text=text,
                note_type=rng.choice([None, "progress", "β-note"]),
                section=rng.choice([None, "hpi", "plan"]),
            )
        )
        docs.append((doc_id, len(text)))

    counter = 0

    def add(doc_id, start, end, cuis, cui_less, status):
        nonlocal counter
        counter += 1
        corpus.add_annotation(
            Annotation(
                id=f"r{serial}-{counter}", doc_id=doc_id, start=start, end=end,
                cuis=frozenset(cuis), cui_less=cui_less,
                annotator_id=rng.choice(["ann1", "ann2", "自動"]),
                status=status, created_at=_random_datetime(rng),
            )
        )

    # Every corpus carries one of each tricky kind: multi-CUI, a nested
    # proposed span, CUI-less, and a rejected annotation.
    first_doc = docs[0][0]
    add(first_doc, 2, 9, ["C0004096", "C0038218"], False, "accepted")
    add(first_doc, 3, 7, ["C0349790"], False, "proposed")
    add(first_doc, 0, 2, [], True, "accepted")
    add(first_doc, 9, 11, ["C0030193"], False, "rejected")

    for _ in range(rng.randint(0, 12)):
        doc_id, length = rng.choice(docs)
        start = rng.randrange(0, length - 1)
        end = rng.randrange(start + 1, length + 1)
        roll = rng.random()
        if roll < 0.2:
            cuis, cui_less = [], True
        elif roll < 0.4:
            cuis, cui_less = rng.sample(CUI_POOL, 2), False
        else:
            cuis, cui_less = [rng.choice(CUI_POOL)], False
        try:
            add(doc_id, start, end, cuis, cui_less,
                rng.choice(["proposed", "accepted", "rejected"]))
        except DuplicateAnnotation:
            pass
    return corpus


def test_corpus_round_trip_identity():
    """import(export(c)) reproduces c exactly over 1000 random corpora."""
    for seed in range(1000):
        rng = random.Random(3000 + seed)
        corpus = _random_corpus(rng, seed)
        blob = export_corpus(corpus)
        again = import_corpus(blob)
        assert again.documents == corpus.documents, f"documents differ, seed {seed}"
        assert again.annotations == corpus.annotations, (
            f"annotations differ, seed {seed}"
        )
        assert export_corpus(again) == blob, f"bytes differ, seed {seed}"


def _free_port():
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def _serve(store_dir, port):
    exe = shutil.which("cuiwb")
    assert exe, "cuiwb script not on PATH"
    return subprocess.Popen(
        [exe, "serve", "--vocab", str(VOCAB), "--store", str(store_dir),
         "--port", str(port)],
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )


def _wait_health(port, deadline=30.0):
    t0 = time.monotonic()
    while time.monotonic() - t0 < deadline:
        try:
            resp = httpx.get(
                f"http://127.0.0.1:{port}/api/health", timeout=1.0
            )
            if resp.status_code == 200:
                return
        except httpx.HTTPError:
            pass
        time.sleep(0.1)
    raise AssertionError("service did not come up")


def test_acknowledged_writes_survive_hard_kill(tmp_path):
    """Annotations acknowledged before SIGKILL are all present on restart."""
    store_dir = tmp_path / "store"
    port = _free_port()
    proc = _serve(store_dir, port)
    acked = []
    try:
        _wait_health(port)
        base = f"http://127.0.0.1:{port}"
        resp = httpx.post(
            f"{base}/api/documents",
            json={"id": "dur-1", "text": "Severe asthma exacerbation noted."},
            timeout=5.0,
        )
        assert resp.status_code == 201
        for i in range(5):
            resp = httpx.post(
                f"{base}/api/documents/dur-1/annotations",
                json={
                    "start": i, "end": i + 6, "cuis": ["C0004096"],
                    "annotator_id": f"ann{i}",
                },
                timeout=5.0,
            )
            assert resp.status_code == 201
            acked.append(resp.json()["id"])
    finally:
        proc.kill()
        proc.wait(timeout=10)

    # The acknowledged writes must be readable straight off the disk,
    reopened = FileStore(str(store_dir))
    on_disk = {a.id for a in reopened.corpus.annotations_for("dur-1")}
    assert set(acked) <= on_disk

    # and visible through a fresh server over the same store.
    port2 = _free_port()
    proc2 = _serve(store_dir, port2)
    try:
        _wait_health(port2)
        resp = httpx.get(
            f"http://127.0.0.1:{port2}/api/documents/dur-1/annotations",
            timeout=5.0,
        )
        assert resp.status_code == 200
        assert {a["id"] for a in resp.json()} >= set(acked)
    finally:
        proc2.kill()
        proc2.wait(timeout=10)
