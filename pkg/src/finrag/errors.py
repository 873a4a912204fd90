"""Exception types shared across the package.

Ingest errors carry a short machine-readable ``code`` so rejected rows can be
reported uniformly in a normalization report.
"""


class FinragError(Exception):
    """Base class for all package errors."""


# --- ingest -----------------------------------------------------------------

class IngestError(FinragError, ValueError):
    code = "ingest_error"


class MissingValue(IngestError):
    code = "missing_value"


class MalformedNumber(IngestError):
    code = "malformed_number"


class InvalidDate(IngestError):
    code = "invalid_date"


class AmbiguousDate(IngestError):
    code = "ambiguous_date"


class MissingField(IngestError):
    code = "missing_field"

    def __init__(self, field: str):
        super().__init__(f"missing required field {field!r}")
        self.field = field


class InvalidField(IngestError):
    """A field failed record validation; ``code`` names the specific check."""

    def __init__(self, message: str, code: str = "invalid_field"):
        super().__init__(message)
        self.code = code


class UnreadableSource(FinragError):
    """The dataset source could not be read or decoded end to end."""


class UnknownFormat(FinragError):
    """The requested dataset format name is not supported."""


# --- passage building ---------------------------------------------------------

class ConflictingCompanyName(FinragError):
    """One (ticker, period) group maps to more than one company name."""


# --- embedding ----------------------------------------------------------------

class EmbedderUnavailable(FinragError):
    """The remote embedding endpoint failed after retries."""


class DimensionMismatch(FinragError, ValueError):
    """A vector's length does not match the expected dimension."""


class EmptyText(FinragError, ValueError):
    """Embedding input was empty."""


# --- vector index ---------------------------------------------------------------

class DuplicateId(FinragError, ValueError):
    """An id was added to the index twice."""


class CorruptIndex(FinragError):
    """Persisted index failed validation (magic, version, or checksum)."""


class TruncatedFile(FinragError):
    """Persisted index ended before all declared sections were read."""


# --- chat gateway ----------------------------------------------------------------

class UpstreamUnavailable(FinragError):
    """The chat endpoint failed after retries."""


class UpstreamRejected(FinragError):
    """The chat endpoint rejected the request (4xx; not retried)."""


class UpstreamTimeout(FinragError):
    """The chat endpoint timed out after retries."""


# --- query pipeline ----------------------------------------------------------------

class EmptyQuestion(FinragError, ValueError):
    """A query was submitted with an empty question."""


# --- evaluation ----------------------------------------------------------------

class InsufficientFacts(FinragError, ValueError):
    """Fewer distinct facts are available than requested QA items."""


class LengthMismatch(FinragError, ValueError):
    """Items and results passed to metric computation are not aligned."""


class EvalExecutionError(FinragError):
    """A pipeline error during a group run, annotated with group and item."""

    def __init__(self, group: str, item_id: str, cause: Exception):
        super().__init__(f"group {group}, item {item_id}: {cause}")
        self.group = group
        self.item_id = item_id
        self.cause = cause
