"""Exception types shared across the workbench."""

from __future__ import annotations


class WorkbenchError(Exception):
    """Base class for all workbench errors."""


class VocabularyError(WorkbenchError):
    """Base class for vocabulary file and index errors."""


class MalformedRow(VocabularyError):
    """A vocabulary row that cannot be parsed. Carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class DuplicatePreferred(VocabularyError):
    """Two rows mark different preferred names for the same CUI."""

    def __init__(self, cui: str, first: str, second: str):
        self.cui = cui
        super().__init__(
            f"{cui}: conflicting preferred names {first!r} and {second!r}"
        )


class EmptyVocabulary(VocabularyError):
    """The vocabulary file contains no concepts."""


class UnknownCui(VocabularyError):
    """A CUI was requested that the vocabulary does not define."""

    def __init__(self, cui: str):
        self.cui = cui
        super().__init__(cui)


class CorpusError(WorkbenchError):
    """Base class for corpus errors."""


class UnknownDocument(CorpusError):
    def __init__(self, doc_id: str):
        self.doc_id = doc_id
        super().__init__(doc_id)


class DuplicateDocument(CorpusError):
    def __init__(self, doc_id: str):
        self.doc_id = doc_id
        super().__init__(doc_id)


class UnknownAnnotation(CorpusError):
    def __init__(self, annotation_id: str):
        self.annotation_id = annotation_id
        super().__init__(annotation_id)


class InvalidOffsets(CorpusError):
    """Annotation offsets fall outside the document or are not start < end."""


class EmptyLabel(CorpusError):
    """Annotation carries no CUIs and is not marked CUI-less."""


class DuplicateAnnotation(CorpusError):
    """Same document, offsets, annotator and label set as an existing annotation."""


class InvalidStatusTransition(CorpusError):
    """Only proposed annotations may be accepted or rejected."""

    def __init__(self, current: str, requested: str):
        self.current = current
        self.requested = requested
        super().__init__(f"cannot move {current} annotation to {requested}")


class MalformedCorpusFile(CorpusError):
    """A corpus JSON document that does not match the expected shape.

    Carries a `location` string such as "annotations[3].start".
    """

    def __init__(self, location: str, message: str):
        self.location = location
        super().__init__(f"{location}: {message}")


class UnknownAnnotator(CorpusError):
    def __init__(self, annotator_id: str):
        self.annotator_id = annotator_id
        super().__init__(annotator_id)


class EvalError(WorkbenchError):
    """Base class for evaluation input errors."""


class EmptyTrainingSet(EvalError):
    """A training-dependent subset was requested with no training spans."""


class NoRuns(EvalError):
    """Evaluation was requested with zero prediction runs."""


class MalformedEvalFile(EvalError):
    """A spans or predictions file that cannot be parsed. Carries the line number."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")
