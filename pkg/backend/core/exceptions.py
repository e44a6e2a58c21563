"""
Exception classes for memnav.

Every failure a command can report is a ``MemnavError`` subclass carrying an
``ErrorCode`` and a details dict, so the run ledger and the CLI exit code can be
derived from the exception alone.
"""

from pathlib import Path
from typing import Any

from .types import EXIT_CODES, ErrorCode, ExitCode


class MemnavError(Exception):
    """
    Base exception for all memnav errors.

    Provides a consistent interface (message, error code, details) for the
    command layer and the run ledger.
    """

    def __init__(
        self,
        message: str,
        error_code: ErrorCode = ErrorCode.UNKNOWN,
        details: dict[str, Any] | None = None,
    ) -> None:
        """
        Initialize the error.

        Args:
            message: Human-readable error message
            error_code: Specific error code from ErrorCode enum
            details: Additional error details for debugging
        """
        super().__init__(message)
        self.error_code = error_code
        self.details = details or {}

    @property
    def exit_code(self) -> ExitCode:
        return EXIT_CODES.get(self.error_code, ExitCode.UNEXPECTED)

    def __str__(self) -> str:
        return f"[{self.error_code.value}] {super().__str__()}"

    def __repr__(self) -> str:
        return (
            f"{self.__class__.__name__}("
            f"message={super().__str__()!r}, "
            f"error_code={self.error_code!r}, "
            f"details={self.details!r})"
        )


class ConfigurationError(MemnavError):
    """Invalid parameters, precondition violations and malformed config files."""

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message, ErrorCode.INVALID_CONFIG, details)


class ShapeError(MemnavError):
    """Exception for tensor or map shape disagreement; reports both shapes."""

    def __init__(
        self,
        message: str,
        expected: tuple[int, ...] | None = None,
        actual: tuple[int, ...] | None = None,
    ) -> None:
        if expected is not None or actual is not None:
            message = f"{message}: expected {expected}, got {actual}"
        super().__init__(
            message,
            ErrorCode.SHAPE_MISMATCH,
            {"expected": expected, "actual": actual},
        )
        self.expected = expected
        self.actual = actual


class InvalidGoalError(MemnavError):
    """Goal placed on an occupied or out-of-bounds cell."""

    def __init__(self, goal: tuple[int, int]) -> None:
        super().__init__(
            f"Goal {goal} is not a free cell",
            ErrorCode.INVALID_GOAL,
            {"goal": goal},
        )
        self.goal = goal


class DomainError(MemnavError):
    """Operation asked outside its domain (e.g. optimal actions at the goal)."""

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message, ErrorCode.DOMAIN_ERROR, details)


class GenerationError(MemnavError):
    """Map generation exhausted its retry budget."""

    def __init__(self, message: str, attempts: int) -> None:
        super().__init__(message, ErrorCode.GENERATION_FAILED, {"attempts": attempts})
        self.attempts = attempts


class SamplingError(MemnavError):
    """No qualifying (start, goal) pair found; callers regenerate the map."""

    def __init__(self, message: str, attempts: int) -> None:
        super().__init__(message, ErrorCode.SAMPLING_FAILED, {"attempts": attempts})
        self.attempts = attempts


class AutodiffStateError(MemnavError):
    """Backward without a recorded graph, optimizer step without gradients, ..."""

    def __init__(self, message: str) -> None:
        super().__init__(message, ErrorCode.AUTODIFF_STATE)


class TrainingDivergedError(MemnavError):
    """Loss became non-finite during training."""

    def __init__(self, step: int, loss: float, diagnostics: dict[str, Any] | None = None) -> None:
        details: dict[str, Any] = {"step": step, "loss": loss}
        if diagnostics:
            details.update(diagnostics)
        super().__init__(
            f"Training diverged at step {step} (loss={loss})",
            ErrorCode.TRAINING_DIVERGED,
            details,
        )
        self.step = step
        self.loss = loss


class CheckpointError(MemnavError):
    """Missing, truncated or inconsistent model checkpoint."""

    def __init__(self, message: str, path: Path | str | None = None) -> None:
        super().__init__(
            message,
            ErrorCode.CHECKPOINT_INVALID,
            {"path": str(path) if path is not None else None},
        )
        self.path = path


class DatasetError(MemnavError):
    """Malformed dataset container (bad magic, truncated record, ...)."""

    def __init__(self, message: str, path: Path | str | None = None) -> None:
        super().__init__(
            message,
            ErrorCode.DATASET_INVALID,
            {"path": str(path) if path is not None else None},
        )
        self.path = path


class TranscriptError(MemnavError):
    """Malformed transcript line."""

    def __init__(self, message: str, line: int | None = None) -> None:
        super().__init__(message, ErrorCode.TRANSCRIPT_INVALID, {"line": line})
        self.line = line


class CheckFailedError(MemnavError):
    """A verification harness (gradient or oracle check) found a mismatch."""

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message, ErrorCode.CHECK_FAILED, details)
