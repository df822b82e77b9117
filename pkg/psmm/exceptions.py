"""Exception hierarchy for the PSMM library and CLI."""
from __future__ import annotations

from typing import Any

EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_BUDGET = 4


class PSMMError(Exception):
    """Base class for errors raised by the PSMM library."""

    category = "validation"
    exit_code = EXIT_VALIDATION

    def __init__(self, message: str, context: Any | None = None) -> None:
        super().__init__(message)
        self.context = context

    def __str__(self) -> str:  # pragma: no cover - trivial
        if self.context is not None:
            return f"{super().__str__()} [{self.context}]"
        return super().__str__()


class UsageError(PSMMError, ValueError):
    """Raised when an operation is called with incompatible arguments."""

    category = "usage"


class FieldMismatchError(UsageError):
    """Raised when operands live in different prime fields."""

    category = "field-mismatch"


class DivisionByZeroError(PSMMError, ZeroDivisionError):
    """Raised when inverting the zero element."""

    category = "division-by-zero"


class PartitionError(UsageError):
    """Raised when a matrix cannot be split into the requested column blocks."""

    category = "partition"


class EncodingError(UsageError):
    """Raised when blocks or masks handed to an encoder have the wrong shape."""

    category = "encoding"


class LiftError(UsageError):
    """Raised when operand dimensions do not divide for blockwise lifting."""

    category = "lift"


class ConfigError(PSMMError):
    """Raised for invalid protocol or run configuration."""

    category = "config"


class PointSelectionError(PSMMError):
    """Raised when no invertible set of evaluation points could be drawn."""

    category = "point-selection"


class SchemeParseError(PSMMError):
    """Raised when a scheme file does not follow the scheme file format."""

    category = "scheme-parse"


class SchemeInvalid(PSMMError):
    """Raised when a bilinear scheme fails verification."""

    category = "scheme-invalid"


class InsufficientShares(PSMMError):
    """Raised when the decoder has fewer independent equations than unknowns."""

    category = "insufficient-shares"

    def __init__(self, needed: int, got: int, message: str | None = None) -> None:
        super().__init__(message or f"need {needed} independent evaluations, got {got}", (needed, got))
        self.needed = needed
        self.got = got


class SingularSystem(PSMMError):
    """Raised when the evaluation system is singular despite enough rows."""

    category = "singular-system"


class PrivacyViolation(PSMMError):
    """Raised when an agent operator consumes randomness or is not a pure function of its share."""

    category = "privacy-violation"


class BudgetError(PSMMError):
    """Raised when an exhaustive enumeration would exceed its budget."""

    category = "budget"
    exit_code = EXIT_BUDGET

    def __init__(self, required: int, budget: int) -> None:
        super().__init__(
            f"enumeration needs {required} assignments, budget is {budget}; "
            "use a smaller prime, smaller blocks or raise PSMM_ENUM_BUDGET",
            (required, budget),
        )
        self.required = required
        self.budget = budget
