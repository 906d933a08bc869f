"""cuiwb: a workbench for concept annotation of clinical text.

Suggests UMLS-style concepts for highlighted text from a vocabulary file,
manages multi-CUI and nested annotations over documents, measures
inter-annotator agreement, and evaluates normalization and end-to-end
recognition output.
"""

from .agreement import AgreementReport, agreement_report, cui_agreement, span_jaccard
from .corpus import (
    CUI_LESS,
    Annotation,
    Corpus,
    CorpusStats,
    Document,
    LintFinding,
    corpus_stats,
    export_corpus,
    import_corpus,
    lint_corpus,
    new_annotation,
)
from .errors import (
    CorpusError,
    DuplicateAnnotation,
    DuplicateDocument,
    DuplicatePreferred,
    EmptyLabel,
    EmptyTrainingSet,
    EmptyVocabulary,
    EvalError,
    InvalidOffsets,
    InvalidStatusTransition,
    MalformedCorpusFile,
    MalformedEvalFile,
    MalformedRow,
    NoRuns,
    UnknownAnnotation,
    UnknownAnnotator,
    UnknownCui,
    UnknownDocument,
    VocabularyError,
    WorkbenchError,
)
from .eval_e2e import (
    MATCH_MODES,
    CompoundAnalysis,
    E2EPrediction,
    E2EReport,
    LenientResult,
    MergedGoldSpan,
    compound_analysis,
    framework_eval,
    lenient_eval,
    lenient_report,
    load_predictions_jsonl,
    merge_gold,
)
from .eval_norm import (
    SUBSET_ORDER,
    GoldSpan,
    NormEvalReport,
    NormRun,
    SubsetAssignment,
    assign_subsets,
    evaluate_norm,
    load_pred_tsv,
    load_spans_tsv,
    preprocess_span_text,
)
from .store import FileStore
from .suggestion import (
    AUTOTAG_ANNOTATOR,
    AUTOTAG_MAX_TOKENS,
    Suggestion,
    SuggestionResult,
    auto_tag,
    direct_matches,
    index_matches,
    suggest,
)
from .vocabulary import (
    STOP_WORDS,
    Concept,
    ConceptSet,
    IndexStats,
    VocabularyIndex,
    build_index,
    load_index,
    load_vocab,
    normalize_term,
    parse_vocab_file,
    stem_tokens,
    tokenize,
)

__version__ = "0.1.0"

__all__ = [
    "agreement_report",
    "AgreementReport",
    "Annotation",
    "AUTOTAG_ANNOTATOR",
    "AUTOTAG_MAX_TOKENS",
    "assign_subsets",
    "auto_tag",
    "build_index",
    "compound_analysis",
    "CompoundAnalysis",
    "Concept",
    "ConceptSet",
    "Corpus",
    "corpus_stats",
    "CorpusError",
    "CorpusStats",
    "cui_agreement",
    "CUI_LESS",
    "direct_matches",
    "Document",
    "DuplicateAnnotation",
    "DuplicateDocument",
    "DuplicatePreferred",
    "E2EPrediction",
    "E2EReport",
    "EmptyLabel",
    "EmptyTrainingSet",
    "EmptyVocabulary",
    "EvalError",
    "evaluate_norm",
    "export_corpus",
    "FileStore",
    "framework_eval",
    "GoldSpan",
    "import_corpus",
    "index_matches",
    "IndexStats",
    "InvalidOffsets",
    "InvalidStatusTransition",
    "lenient_eval",
    "lenient_report",
    "LenientResult",
    "lint_corpus",
    "LintFinding",
    "load_index",
    "load_pred_tsv",
    "load_predictions_jsonl",
    "load_spans_tsv",
    "load_vocab",
    "MalformedCorpusFile",
    "MalformedEvalFile",
    "MalformedRow",
    "MATCH_MODES",
    "merge_gold",
    "MergedGoldSpan",
    "new_annotation",
    "normalize_term",
    "NormEvalReport",
    "NormRun",
    "NoRuns",
    "parse_vocab_file",
    "preprocess_span_text",
    "span_jaccard",
    "stem_tokens",
    "STOP_WORDS",
    "SUBSET_ORDER",
    "SubsetAssignment",
    "suggest",
    "Suggestion",
    "SuggestionResult",
    "tokenize",
    "UnknownAnnotation",
    "UnknownAnnotator",
    "UnknownCui",
    "UnknownDocument",
    "VocabularyError",
    "VocabularyIndex",
    "WorkbenchError",
]
