"""Exception types shared across the package."""

from __future__ import annotations


class VecsearchError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(VecsearchError, ValueError):
    """An argument violates an operation's contract."""


class DimensionMismatchError(InvalidArgumentError):
    """Two vectors (or a vector and an index) disagree on dimension."""

    def __init__(self, expected: int, actual: int, context: str = ""):
        self.expected = int(expected)
        self.actual = int(actual)
        detail = f" ({context})" if context else ""
        super().__init__(
            f"dimension mismatch: expected {self.expected}, got {self.actual}{detail}"
        )


class DuplicateIdError(VecsearchError):
    """A document id was added to an index that already contains it."""


class EmptyIndexError(VecsearchError):
    """A search was issued against an index with no entries."""


class CorruptIndexError(VecsearchError):
    """An index image failed to load; the message names the failing section."""

    def __init__(self, section: str, detail: str = ""):
        self.section = section
        msg = f"corrupt index image in section '{section}'"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class ParseError(VecsearchError):
    """A text input line could not be parsed; carries the 1-based line number."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
