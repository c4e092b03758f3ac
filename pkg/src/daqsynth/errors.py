"""Exception types shared across the package."""


class DaqSynthError(Exception):
    """Base class for every error raised by this package."""


class UsageError(DaqSynthError):
    """A caller violated an operation precondition."""


class ConfigurationError(DaqSynthError):
    """Missing or invalid runtime configuration (API keys, paths)."""


class TransportError(DaqSynthError):
    """HTTP-level failure while talking to a live model endpoint."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class ScriptUnderrunError(DaqSynthError):
    """A scripted backend ran out of queued responses."""


class ScriptParseError(DaqSynthError):
    """A response script file could not be parsed."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ExtractionError(DaqSynthError):
    """No well-formed DOT payload could be extracted from model output."""


class DotParseError(DaqSynthError):
    """DOT source uses syntax outside the supported subset."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class RenderError(DaqSynthError):
    """A prompt template could not be rendered."""


class ConsistencyError(DaqSynthError):
    """Conversation content contradicts the requested operation."""


class StateError(DaqSynthError):
    """An operation was invoked in the wrong session state."""


class StageError(DaqSynthError):
    """A session stage could not complete; the session is marked failed."""


class CorpusIntegrityError(DaqSynthError):
    """Testbench corpus files do not match their pinned checksums."""


class SessionNotFoundError(DaqSynthError):
    """No persisted session exists under the given id."""


class SessionLoadError(DaqSynthError):
    """A persisted session log could not be replayed."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line
