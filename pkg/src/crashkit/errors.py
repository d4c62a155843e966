"""Shared error types.

Every failure the toolkit raises on purpose derives from CrashKitError so the
CLI can map domain failures to exit code 1 and usage problems to exit code 2.
"""

from __future__ import annotations


class CrashKitError(Exception):
    """Base class for all toolkit errors."""

    code = "error"

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.context = context


class OutOfRange(CrashKitError):
    """A codec was asked for an id/code/token outside its closed set."""

    code = "out_of_range"


class SchemaMismatch(CrashKitError):
    """A source table header does not carry the required columns."""

    code = "schema_mismatch"


class ParseError(CrashKitError):
    """A source file could not be read as delimiter-separated text."""

    code = "parse_error"

    def __init__(self, message: str, line_no: int | None = None, **context):
        super().__init__(message, line_no=line_no, **context)
        self.line_no = line_no


class TemplateError(CrashKitError):
    """A template references an unknown slot or cannot be parsed."""

    code = "template_error"


class OutOfDomain(CrashKitError):
    """A projected point lies outside the projection's valid cone."""

    code = "out_of_domain"


class NonConvergence(CrashKitError):
    """Iterative latitude recovery failed to converge."""

    code = "non_convergence"


class InvalidZoom(CrashKitError):
    """Requested map zoom level is outside the supported range."""

    code = "invalid_zoom"


class EmptyBucket(CrashKitError):
    """Uniform resampling requires every class bucket to be non-empty."""

    code = "empty_bucket"


class DimensionMismatch(CrashKitError):
    """A matrix width does not match what a fitted model expects."""

    code = "dimension_mismatch"


class LengthMismatch(CrashKitError):
    """Two aligned sequences have different lengths."""

    code = "length_mismatch"


class UnknownLabel(CrashKitError):
    """A prediction or truth label is not in the declared class list."""

    code = "unknown_label"


class EmptyMatrix(CrashKitError):
    """An operation received an empty matrix or empty label vector."""

    code = "empty_matrix"


class MissingCell(CrashKitError):
    """Rank aggregation requires every model to fill all metric cells."""

    code = "missing_cell"


class TransportError(CrashKitError):
    """An HTTP request failed at the transport level (retryable)."""

    code = "transport_error"


class InvalidLabel(CrashKitError):
    """A predictor returned text that is not a legal label token."""

    code = "invalid_label"

    def __init__(self, message: str, raw: str = "", **context):
        super().__init__(message, raw=raw, **context)
        self.raw = raw


class EmptyComplement(CrashKitError):
    """A perturbation plan has no records left to convert."""

    code = "empty_complement"


class DictionaryError(CrashKitError):
    """The feature dictionary file is malformed or inconsistent."""

    code = "dictionary_error"
