"""Exception types raised by quizstats.

Every error carries a short machine-readable ``code`` (``SYNTAX``,
``SCORE_RANGE``, ...).  :class:`ParseError` covers malformed documents;
everything else that is well-formed but violates a domain rule is a
:class:`ValidationError`.
"""

from __future__ import annotations

from typing import Optional


class QuizStatsError(ValueError):
    code = "ERROR"

    def __init__(self, message: str, code: Optional[str] = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class ParseError(QuizStatsError):
    """A document could not be read in its declared format."""

    code = "SYNTAX"

    def __init__(
        self,
        message: str,
        *,
        source: Optional[str] = None,
        line: Optional[int] = None,
        column: Optional[int] = None,
    ):
        self.source = source
        self.line = line
        self.column = column
        where = []
        if source:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class ValidationError(QuizStatsError):
    """Input is well-formed but semantically invalid."""

    code = "SEMANTIC"
