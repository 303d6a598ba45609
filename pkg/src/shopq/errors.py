"""Exception hierarchy shared across the pipeline.

Every error carries a stable ``error_class`` string so the CLI can emit a
single machine-parsable failure line and exit nonzero.
"""

from __future__ import annotations


class ShopqError(Exception):
    """Base class for all pipeline errors."""

    error_class = "error"


class InputFormatError(ShopqError):
    """Input file is readable but does not look like the expected format."""

    error_class = "format_error"


class ContractViolation(ShopqError):
    """A documented precondition was violated by the caller."""

    error_class = "contract_violation"


class OversizeContextError(ShopqError):
    """Context text exceeds the configured token budget."""

    error_class = "oversize_error"


class TransportError(ShopqError):
    """Network-level failure after retries were exhausted."""

    error_class = "transport_error"

    def __init__(self, message: str, attempts: list[str] | None = None):
        super().__init__(message)
        self.attempts = attempts or []


class RequestError(ShopqError):
    """Remote endpoint rejected the request (HTTP 4xx)."""

    error_class = "request_error"

    def __init__(self, message: str, status_code: int):
        super().__init__(message)
        self.status_code = status_code


class MalformedResponseError(ShopqError):
    """Remote endpoint answered but the payload had no usable text."""

    error_class = "malformed_response"


class PartialStreamError(ShopqError):
    """Stream broke mid-generation; carries the chunks received so far."""

    error_class = "partial_stream"

    def __init__(self, message: str, chunks: list[str]):
        super().__init__(message)
        self.chunks = chunks


class ExportError(ShopqError):
    """Dataset export cannot proceed (e.g. nothing exportable)."""

    error_class = "export_error"


class ConfigError(ShopqError):
    """Bad or missing configuration."""

    error_class = "config_error"
