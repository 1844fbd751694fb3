"""Exception types shared across the package."""

from __future__ import annotations


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class OutOfRangeError(ValueError):
    """A query point or index lies outside the valid domain."""


class ParseError(ValueError):
    """A file could not be parsed.

    Carries the one-based line number when known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
