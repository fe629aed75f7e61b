"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class TrailbotError(Exception):
    """Base class for all engine errors."""


class ValidationError(TrailbotError):
    """A record or argument violates an invariant."""


class NotFoundError(TrailbotError):
    """A referenced trail or review does not exist."""


class IngestError(TrailbotError):
    """A corpus file is malformed or inconsistent.

    ``line`` is the 1-based line number of the offending record when known.
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class FilterParseError(TrailbotError):
    """Filter DSL text failed to parse or type-check.

    ``position`` is the 0-based character offset of the error; ``expected``
    lists token descriptions that would have been accepted there.
    """

    def __init__(self, message: str, position: int, expected: tuple[str, ...] = ()):
        detail = f"{message} at position {position}"
        if expected:
            detail += " (expected " + " or ".join(expected) + ")"
        super().__init__(detail)
        self.position = position
        self.expected = expected


class DegenerateVectorError(TrailbotError):
    """A vector with zero norm cannot be normalized."""


class BackendError(TrailbotError):
    """A remote embedding or LLM backend failed or timed out.

    ``backend`` names the failing backend kind (``embedder`` or ``llm``).
    """

    def __init__(self, message: str, backend: str = "backend"):
        super().__init__(message)
        self.backend = backend


class BatchEmbedError(BackendError):
    """One element of a batch embed failed; ``index`` names the element."""

    def __init__(self, message: str, index: int):
        super().__init__(f"batch element {index}: {message}", backend="embedder")
        self.index = index


class GatewayError(BackendError):
    """The LLM backend returned no usable completion."""

    def __init__(self, message: str):
        super().__init__(message, backend="llm")


class ConfigurationError(TrailbotError):
    """Mismatched or invalid wiring, e.g. query dim != index dim."""
