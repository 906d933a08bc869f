"""File-backed persistence for one corpus.

Layout under the store root:

    config.json           records the vocabulary path the store was opened with
    docs/<id>.json        one document per file
    annotations/<id>.json JSON list of the document's annotations

Document ids are percent-encoded in filenames so opaque ids cannot traverse
out of the store. Every write goes to a temp file in the same directory,
fsyncs, then renames over the target, so a crash mid-write leaves the old
content intact and a response is only sent after the bytes are durable.
Reads need no lock; mutations are serialized per document.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from pathlib import Path
from urllib.parse import quote, unquote

from .corpus import Annotation, Corpus, Document, parse_timestamp
from .errors import MalformedCorpusFile, UnknownAnnotation, UnknownDocument
from .suggestion import auto_tag
from .vocabulary import VocabularyIndex


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.parent / f".{path.name}.{uuid.uuid4().hex}.tmp"
    fd = os.open(tmp, os.O_WRONLY | os.O_CREAT | os.O_EXCL, 0o644)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
        dir_fd = os.open(path.parent, os.O_RDONLY)
        try:
            os.fsync(dir_fd)
        finally:
            os.close(dir_fd)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


def _doc_filename(doc_id: str) -> str:
    return quote(doc_id, safe="") + ".json"


class FileStore:
    """Corpus persistence rooted at a directory."""

    def __init__(self, root: str | Path, vocab_path: str | None = None):
        self.root = Path(root)
        self.docs_dir = self.root / "docs"
        self.anns_dir = self.root / "annotations"
        self.docs_dir.mkdir(parents=True, exist_ok=True)
        self.anns_dir.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self.corpus = Corpus()
        self._load()
        if vocab_path is not None:
            _atomic_write(
                self.root / "config.json",
                json.dumps({"vocab": str(vocab_path)}, indent=2).encode("utf-8"),
            )

    def vocab_path(self) -> str | None:
        config = self.root / "config.json"
        if not config.exists():
            return None
        return json.loads(config.read_text("utf-8")).get("vocab")

    def _load(self) -> None:
        try:
            for path in sorted(self.docs_dir.glob("*.json")):
                raw = json.loads(path.read_text("utf-8"))
                doc = Document(
                    id=raw["id"],
                    text=raw["text"],
                    note_type=raw.get("note_type"),
                    section=raw.get("section"),
                )
                expected = unquote(path.stem)
                if doc.id != expected:
                    raise MalformedCorpusFile(
                        str(path), f"document id {doc.id!r} does not match filename"
                    )
                self.corpus.documents[doc.id] = doc
                self.corpus._doc_anns.setdefault(doc.id, [])
            for path in sorted(self.anns_dir.glob("*.json")):
                doc_id = unquote(path.stem)
                if doc_id not in self.corpus.documents:
                    raise MalformedCorpusFile(
                        str(path), f"annotations for unknown document {doc_id!r}"
                    )
                for raw in json.loads(path.read_text("utf-8")):
                    ann = Annotation(
                        id=raw["id"],
                        doc_id=raw["doc_id"],
                        start=raw["start"],
                        end=raw["end"],
                        cuis=frozenset(raw["cuis"]),
                        cui_less=raw["cui_less"],
                        annotator_id=raw["annotator_id"],
                        status=raw["status"],
                        created_at=parse_timestamp(raw["created_at"]),
                    )
                    self.corpus._insert_raw(ann)
        except KeyError as exc:
            raise MalformedCorpusFile(str(self.root), f"missing key {exc}") from None

    def _lock(self, doc_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(doc_id, threading.Lock())

    def _write_document(self, doc: Document) -> None:
        _atomic_write(
            self.docs_dir / _doc_filename(doc.id),
            json.dumps(doc.to_json_dict(), ensure_ascii=False, indent=2).encode("utf-8"),
        )

    def _write_annotations(self, doc_id: str) -> None:
        anns = [a.to_json_dict() for a in self.corpus.annotations_for(doc_id)]
        _atomic_write(
            self.anns_dir / _doc_filename(doc_id),
            json.dumps(anns, ensure_ascii=False, indent=2).encode("utf-8"),
        )

    def add_document(self, doc: Document) -> Document:
        # Document creation takes the global guard: the doc lock cannot exist yet.
        with self._locks_guard:
            doc_id = self.corpus.add_document(doc)
            stored = self.corpus.documents[doc_id]
            self._write_document(stored)
            return stored

    def add_annotation(self, ann: Annotation) -> Annotation:
        with self._lock(ann.doc_id):
            ann_id = self.corpus.add_annotation(ann)
            self._write_annotations(ann.doc_id)
            return self.corpus.annotations[ann_id]

    def update_annotation(self, ann: Annotation) -> Annotation:
        old = self.corpus.annotations.get(ann.id)
        if old is None:
            raise UnknownAnnotation(ann.id)
        with self._lock(old.doc_id):
            updated = self.corpus.update_annotation(ann)
            self._write_annotations(old.doc_id)
            if updated.doc_id != old.doc_id:
                self._write_annotations(updated.doc_id)
            return updated

    def delete_annotation(self, ann_id: str) -> Annotation:
        ann = self.corpus.annotations.get(ann_id)
        if ann is None:
            raise UnknownAnnotation(ann_id)
        with self._lock(ann.doc_id):
            removed = self.corpus.remove_annotation(ann_id)
            self._write_annotations(ann.doc_id)
            return removed

    def set_status(self, ann_id: str, status: str) -> Annotation:
        ann = self.corpus.annotations.get(ann_id)
        if ann is None:
            raise UnknownAnnotation(ann_id)
        with self._lock(ann.doc_id):
            updated = self.corpus.set_status(ann_id, status)
            self._write_annotations(ann.doc_id)
            return updated

    def autotag(self, doc_id: str, idx: VocabularyIndex) -> list[Annotation]:
        """Insert unambiguous-match proposals for a document. Idempotent:
        spans already annotated (any status) are never re-proposed."""
        doc = self.corpus.documents.get(doc_id)
        if doc is None:
            raise UnknownDocument(doc_id)
        with self._lock(doc_id):
            existing = self.corpus.annotations_for(doc_id)
            proposals = auto_tag(idx, doc, existing)
            for p in proposals:
                self.corpus.add_annotation(p)
            if proposals:
                self._write_annotations(doc_id)
            return proposals
