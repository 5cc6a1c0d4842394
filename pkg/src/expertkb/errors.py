"""Error types shared across the package.

Every error carries a stable machine-readable ``code`` so the service layer
can map it to exactly one HTTP (status, code) pair.
"""

from __future__ import annotations


class KnowledgeBaseError(Exception):
    """Base class for all domain errors."""

    code = "InternalError"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


class IllegalTransition(KnowledgeBaseError):
    code = "IllegalTransition"


class Unauthorized(KnowledgeBaseError):
    code = "Unauthorized"


class ConsentMissing(KnowledgeBaseError):
    code = "ConsentMissing"


class ConsentScopeViolation(KnowledgeBaseError):
    code = "ConsentScopeViolation"


class InvalidDuration(KnowledgeBaseError):
    code = "InvalidDuration"


class InvalidEncoding(KnowledgeBaseError):
    code = "InvalidEncoding"


class BadWindow(KnowledgeBaseError):
    code = "BadWindow"


class EmptyDocument(KnowledgeBaseError):
    code = "EmptyDocument"


class DuplicateDocument(KnowledgeBaseError):
    code = "DuplicateDocument"


class BackendFailure(KnowledgeBaseError):
    code = "BackendFailure"


class NotIndexed(KnowledgeBaseError):
    code = "NotIndexed"


class MissingEditText(KnowledgeBaseError):
    code = "MissingEditText"


class EmptyInput(KnowledgeBaseError):
    code = "EmptyInput"


class DimensionMismatch(KnowledgeBaseError):
    code = "DimensionMismatch"


class NotValidated(KnowledgeBaseError):
    code = "NotValidated"


class CorruptFile(KnowledgeBaseError):
    code = "CorruptFile"


class VersionMismatch(KnowledgeBaseError):
    code = "VersionMismatch"


class Forbidden(KnowledgeBaseError):
    code = "Forbidden"


class EmptyQuestion(KnowledgeBaseError):
    code = "EmptyQuestion"


class UnknownQuery(KnowledgeBaseError):
    code = "UnknownQuery"


class AlreadySet(KnowledgeBaseError):
    code = "AlreadySet"


class MissingElement(KnowledgeBaseError):
    code = "MissingElement"


class PastRetention(KnowledgeBaseError):
    code = "PastRetention"


class NotActive(KnowledgeBaseError):
    code = "NotActive"


class ScanFailed(KnowledgeBaseError):
    code = "ScanFailed"


class SampleTooLarge(KnowledgeBaseError):
    code = "SampleTooLarge"


class EmptyWindow(KnowledgeBaseError):
    code = "EmptyWindow"


class OutOfRange(KnowledgeBaseError):
    code = "OutOfRange"


class Duplicate(KnowledgeBaseError):
    code = "Duplicate"


class UnknownEntity(KnowledgeBaseError):
    """A referenced id (expert, document, artifact, job, ...) does not exist."""

    code = "UnknownEntity"


ALL_ERRORS = [
    cls
    for cls in list(globals().values())
    if isinstance(cls, type)
    and issubclass(cls, KnowledgeBaseError)
    and cls is not KnowledgeBaseError
]
