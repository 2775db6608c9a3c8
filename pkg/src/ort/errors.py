"""Exception hierarchy shared by every stage of the pipeline.

Each top-level family carries the process exit code the CLI maps it to, so
callers never need a lookup table of their own.
"""

from __future__ import annotations


class OrtError(Exception):
    exit_code = 1
    code = "error"


class ConfigError(OrtError):
    exit_code = 2
    code = "config"


class DataError(OrtError):
    exit_code = 3
    code = "data"


class MalformedLineError(DataError):
    def __init__(self, lineno: int, reason: str, line: str = ""):
        self.lineno = lineno
        self.reason = reason
        self.line = line
        super().__init__(f"line {lineno}: {reason}")


class LabelExtractionError(DataError):
    def __init__(self, relation: str):
        self.relation = relation
        super().__init__(f"cannot derive labels from relation {relation!r}: need at least two dotted segments")


class IndexFormatError(DataError):
    pass


class IndexVersionError(IndexFormatError):
    pass


class IndexCorruptError(IndexFormatError):
    pass


class DatasetError(DataError):
    pass


class UnknownLabelError(DataError):
    def __init__(self, labels):
        self.labels = sorted(set(labels))
        super().__init__(f"labels not in ontology: {', '.join(self.labels)}")


class EmptyPathSetError(OrtError):
    exit_code = 5
    code = "empty-path"


class GatewayError(OrtError):
    exit_code = 4
    code = "gateway"


class TransportError(GatewayError):
    """A single failed exchange with a backend; retryable."""


class ParseError(GatewayError):
    def __init__(self, message: str, raw: str = ""):
        self.raw = raw
        super().__init__(message)


class LabelVocabularyError(GatewayError):
    def __init__(self, labels, raw: str = ""):
        self.labels = sorted(set(labels))
        self.raw = raw
        super().__init__(f"model used labels outside the label list: {', '.join(self.labels)}")


class MockMissError(GatewayError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"no mock fixture for key {key}")


class MissingBindingError(GatewayError):
    def __init__(self, template: str, names):
        self.names = sorted(names)
        super().__init__(f"template {template!r} has unbound placeholders: {', '.join(self.names)}")
