"""HTTP service exposing suggestions, the annotation store, and evaluation.

All state lives in a FileStore plus a vocabulary index loaded once at
startup. Handlers that mutate run synchronously so the store's per-document
locks serialize them; a success response is not sent until the change is on
disk.

Error mapping: unknown ids are 404, duplicates and illegal status transitions
are 409, annotation payloads failing the error-severity lints are 422 with
the lint findings in the body, and anything malformed in query parameters or
uploads is 400.
"""

from __future__ import annotations

from email import policy
from email.parser import BytesParser
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .agreement import agreement_report
from .corpus import (
    Annotation,
    Document,
    LintFinding,
    import_corpus,
    new_annotation,
    parse_timestamp,
)
from .errors import (
    DuplicateAnnotation,
    DuplicateDocument,
    EmptyLabel,
    InvalidOffsets,
    InvalidStatusTransition,
    MalformedCorpusFile,
    MalformedEvalFile,
    UnknownAnnotation,
    UnknownAnnotator,
    UnknownDocument,
    WorkbenchError,
)
from .eval_e2e import (
    framework_eval,
    lenient_report,
    load_predictions_jsonl,
    merge_gold,
)
from .eval_norm import (
    assign_subsets,
    evaluate_norm,
    load_pred_tsv,
    load_spans_tsv,
)
from .store import FileStore
from .suggestion import suggest
from .vocabulary import load_index

MAX_SUGGEST_K = 100
DEFAULT_SUGGEST_K = 10


class DocumentIn(BaseModel):
    id: str | None = None
    text: str
    note_type: str | None = None
    section: str | None = None


class AnnotationIn(BaseModel):
    start: int
    end: int
    cuis: list[str] = []
    cui_less: bool = False
    annotator_id: str
    status: str = "accepted"
    created_at: str | None = None


class AnnotationUpdate(BaseModel):
    start: int
    end: int
    cuis: list[str] = []
    cui_less: bool = False
    annotator_id: str | None = None


class StatusIn(BaseModel):
    status: str


def _bad_request(message: str) -> JSONResponse:
    return JSONResponse(status_code=400, content={"detail": message})


def _lint_payload(ann: Annotation, exc: WorkbenchError) -> dict:
    if isinstance(exc, InvalidOffsets):
        finding = LintFinding(
            "L1_offsets", "error", ann.doc_id, ann.id, ann.start, ann.end, str(exc)
        )
    else:
        finding = LintFinding(
            "L2_empty_label", "error", ann.doc_id, ann.id, ann.start, ann.end, str(exc)
        )
    return {"detail": "annotation failed lint", "findings": [finding.to_json_dict()]}


class MultipartPart:
    def __init__(self, name: str, filename: str | None, data: bytes):
        self.name = name
        self.filename = filename
        self.data = data


def parse_multipart(content_type: str | None, body: bytes) -> list[MultipartPart]:
    """Parse a multipart/form-data body with the stdlib email machinery."""
    if not content_type or "multipart/form-data" not in content_type.lower():
        raise ValueError("expected a multipart/form-data body")
    document = (
        b"Content-Type: "
        + content_type.encode("latin-1")
        + b"\r\nMIME-Version: 1.0\r\n\r\n"
        + body
    )
    message = BytesParser(policy=policy.default).parsebytes(document)
    if not message.is_multipart():
        raise ValueError("unparseable multipart body")
    parts = []
    for part in message.iter_parts():
        name = part.get_param("name", header="content-disposition")
        if name is None:
            continue
        payload = part.get_payload(decode=True)
        parts.append(MultipartPart(str(name), part.get_filename(), payload or b""))
    return parts


def _system_id(part: MultipartPart, fallback: str) -> str:
    if part.filename:
        return Path(part.filename).stem
    return fallback


def create_app(
    vocab_path: str, store_dir: str, ui_dir: str | None = None
) -> FastAPI:
    idx = load_index(vocab_path)
    store = FileStore(store_dir, vocab_path=vocab_path)

    app = FastAPI(title="cuiwb", docs_url=None, redoc_url=None)
    app.state.index = idx
    app.state.store = store

    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(RequestValidationError)
    async def _on_validation(request: Request, exc: RequestValidationError):
        return _bad_request(str(exc.errors()))

    @app.exception_handler(WorkbenchError)
    async def _on_workbench_error(request: Request, exc: WorkbenchError):
        if isinstance(exc, (UnknownDocument, UnknownAnnotation, UnknownAnnotator)):
            return JSONResponse(status_code=404, content={"detail": str(exc)})
        if isinstance(
            exc, (DuplicateDocument, DuplicateAnnotation, InvalidStatusTransition)
        ):
            return JSONResponse(status_code=409, content={"detail": str(exc)})
        if isinstance(exc, (MalformedEvalFile, MalformedCorpusFile)):
            return _bad_request(str(exc))
        return _bad_request(str(exc))

    @app.get("/api/health")
    def health() -> dict:
        stats = idx.stats()
        return {
            "status": "ok",
            "concepts": stats.concept_count,
            "documents": len(store.corpus.documents),
        }

    @app.get("/api/suggest")
    def get_suggest(request: Request):
        params = request.query_params
        if "q" not in params:
            return _bad_request("missing query parameter q")
        raw_k = params.get("k")
        k = DEFAULT_SUGGEST_K
        if raw_k is not None:
            try:
                k = int(raw_k)
            except ValueError:
                return _bad_request("k must be an integer")
        if not 1 <= k <= MAX_SUGGEST_K:
            return _bad_request(f"k must be between 1 and {MAX_SUGGEST_K}")
        return suggest(idx, params["q"], k).to_json_dict()

    @app.get("/api/documents")
    def list_documents() -> list:
        docs = store.corpus.documents
        return [docs[i].to_json_dict() for i in sorted(docs)]

    @app.post("/api/documents", status_code=201)
    def create_document(payload: DocumentIn):
        doc = Document(
            id=payload.id or "",
            text=payload.text,
            note_type=payload.note_type,
            section=payload.section,
        )
        return store.add_document(doc).to_json_dict()

    @app.get("/api/documents/{doc_id}")
    def get_document(doc_id: str):
        doc = store.corpus.documents.get(doc_id)
        if doc is None:
            raise UnknownDocument(doc_id)
        return doc.to_json_dict()

    @app.get("/api/documents/{doc_id}/annotations")
    def list_annotations(doc_id: str) -> list:
        return [a.to_json_dict() for a in store.corpus.annotations_for(doc_id)]

    @app.post("/api/documents/{doc_id}/annotations", status_code=201)
    def create_annotation(doc_id: str, payload: AnnotationIn):
        if not payload.annotator_id:
            return _bad_request("annotator_id must not be empty")
        if payload.status not in ("proposed", "accepted", "rejected"):
            return _bad_request(f"unknown status {payload.status!r}")
        created_at = (
            parse_timestamp(payload.created_at) if payload.created_at else None
        )
        ann = new_annotation(
            doc_id=doc_id,
            start=payload.start,
            end=payload.end,
            cuis=payload.cuis,
            cui_less=payload.cui_less,
            annotator_id=payload.annotator_id,
            status=payload.status,
            created_at=created_at,
        )
        try:
            return store.add_annotation(ann).to_json_dict()
        except (InvalidOffsets, EmptyLabel) as exc:
            return JSONResponse(status_code=422, content=_lint_payload(ann, exc))

    @app.put("/api/annotations/{ann_id}")
    def update_annotation(ann_id: str, payload: AnnotationUpdate):
        current = store.corpus.annotations.get(ann_id)
        if current is None:
            raise UnknownAnnotation(ann_id)
        updated = Annotation(
            id=ann_id,
            doc_id=current.doc_id,
            start=payload.start,
            end=payload.end,
            cuis=frozenset(payload.cuis),
            cui_less=payload.cui_less,
            annotator_id=payload.annotator_id or current.annotator_id,
            status=current.status,
            created_at=current.created_at,
        )
        try:
            return store.update_annotation(updated).to_json_dict()
        except (InvalidOffsets, EmptyLabel) as exc:
            return JSONResponse(status_code=422, content=_lint_payload(updated, exc))

    @app.delete("/api/annotations/{ann_id}")
    def delete_annotation(ann_id: str):
        return store.delete_annotation(ann_id).to_json_dict()

    @app.post("/api/annotations/{ann_id}/status")
    def set_status(ann_id: str, payload: StatusIn):
        if payload.status not in ("accepted", "rejected"):
            return _bad_request("status must be accepted or rejected")
        return store.set_status(ann_id, payload.status).to_json_dict()

    @app.post("/api/autotag/{doc_id}", status_code=201)
    def autotag(doc_id: str) -> list:
        return [a.to_json_dict() for a in store.autotag(doc_id, idx)]

    @app.get("/api/agreement")
    def get_agreement(request: Request):
        params = request.query_params
        a, b = params.get("a"), params.get("b")
        if not a or not b:
            return _bad_request("query parameters a and b are required")
        return agreement_report(store.corpus, a, b).to_json_dict()

    @app.post("/api/eval/norm")
    async def eval_norm_endpoint(request: Request):
        try:
            parts = parse_multipart(
                request.headers.get("content-type"), await request.body()
            )
        except ValueError as exc:
            return _bad_request(str(exc))
        train_part = next((p for p in parts if p.name == "train"), None)
        gold_part = next((p for p in parts if p.name == "gold"), None)
        pred_parts = [p for p in parts if p.name == "pred"]
        corpus_part = next((p for p in parts if p.name == "corpus"), None)
        semtype_part = next((p for p in parts if p.name == "semtype_min"), None)
        if train_part is None or gold_part is None:
            return _bad_request("multipart parts train and gold are required")
        if not pred_parts:
            return _bad_request("at least one pred part is required")
        if any(not p.data.strip() for p in pred_parts):
            return _bad_request("empty prediction upload")

        semtype_min = 50
        if semtype_part is not None:
            try:
                semtype_min = int(semtype_part.data.decode("utf-8").strip())
            except ValueError:
                return _bad_request("semtype_min must be an integer")

        corpus = import_corpus(corpus_part.data) if corpus_part else None
        train = load_spans_tsv(train_part.data, corpus)
        gold = load_spans_tsv(gold_part.data, corpus)
        runs = [
            load_pred_tsv(p.data, _system_id(p, f"pred{i + 1}"))
            for i, p in enumerate(pred_parts)
        ]
        assignment = assign_subsets(train, gold, idx)
        report = evaluate_norm(
            gold, runs, assignment, idx.concepts, semtype_min_count=semtype_min
        )
        return report.to_json_dict()

    @app.post("/api/eval/e2e")
    async def eval_e2e_endpoint(request: Request):
        try:
            parts = parse_multipart(
                request.headers.get("content-type"), await request.body()
            )
        except ValueError as exc:
            return _bad_request(str(exc))
        fields = {p.name: p.data.decode("utf-8", "replace").strip() for p in parts if not p.filename}
        pred_part = next((p for p in parts if p.name == "pred"), None)
        if pred_part is None or not pred_part.data.strip():
            return _bad_request("empty prediction upload")

        mode = fields.get("mode", "lenient")
        if mode not in ("lenient", "framework"):
            return _bad_request("mode must be lenient or framework")
        match_mode = fields.get("match", "exact")
        if match_mode not in ("exact", "overlap"):
            return _bad_request("match must be exact or overlap")
        try:
            semtype_min = int(fields.get("semtype_min", "50"))
        except ValueError:
            return _bad_request("semtype_min must be an integer")

        preds = load_predictions_jsonl(pred_part.data)
        corpus = store.corpus
        annotator_a = fields.get("annotator_a")
        annotator_b = fields.get("annotator_b")
        if annotator_a and annotator_b:
            present = {a.annotator_id for a in corpus.annotations.values()}
            for annotator in (annotator_a, annotator_b):
                if annotator not in present:
                    raise UnknownAnnotator(annotator)
            gold_a = list(corpus.accepted(annotator_a))
            gold_b = list(corpus.accepted(annotator_b))
        else:
            gold_a = list(corpus.accepted())
            gold_b = []

        if mode == "framework":
            report = framework_eval(
                gold_a, gold_b, preds, match_mode, idx.concepts, semtype_min
            )
        else:
            merged = merge_gold(gold_a, gold_b, keep_cui_less=True)
            report = lenient_report(merged, preds, idx.concepts, semtype_min)
        return report.to_json_dict()

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
