"""Exception types shared across the gateway pipeline."""


class PrivgateError(Exception):
    """Base class for all errors raised by this package."""


class RuleConfigError(PrivgateError):
    """A rule file or rule set failed validation."""


class SizeLimitError(PrivgateError):
    """Input exceeded a configured size cap."""


class ContractViolation(PrivgateError):
    """Caller passed spans that violate an operation's precondition."""


class MappingConflictError(PrivgateError):
    """A manual substitute term collides with an existing placeholder mapping."""


class LeakageError(PrivgateError):
    """Text bound for the upstream still contains an original surface."""

    def __init__(self, message: str, surfaces: list[str] | None = None):
        super().__init__(message)
        self.surfaces = surfaces or []


class SessionNotFound(PrivgateError):
    """No stored session exists for the given id."""


class RecordIntegrityError(PrivgateError):
    """A stored session record is corrupt or has an unsupported schema."""


class StoreError(PrivgateError):
    """Session storage is unwritable or otherwise failed."""


class DocumentParseError(PrivgateError):
    """A document could not be parsed; carries the byte offset of the fault."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


class UnsupportedFormatError(PrivgateError):
    """The document format is not one of the supported input formats."""


class BackendUnavailable(PrivgateError):
    """A detection or generation backend could not be reached in time."""


class UpstreamError(PrivgateError):
    """The upstream chat endpoint returned a non-success status."""

    def __init__(self, status_code: int, body: str = ""):
        super().__init__(f"upstream returned status {status_code}")
        self.status_code = status_code
        self.body = body


class CorpusError(PrivgateError):
    """An evaluation corpus is missing, empty, or malformed."""
