"""
Shared type definitions for memnav.

Error codes are carried by every ``MemnavError`` and recorded in the run ledger;
exit codes are what management commands return to the shell.
"""

from enum import Enum, IntEnum


class ErrorCode(str, Enum):
    """Enumeration of possible error codes for memnav operations."""

    INVALID_CONFIG = "invalid_config"
    SHAPE_MISMATCH = "shape_mismatch"
    INVALID_GOAL = "invalid_goal"
    DOMAIN_ERROR = "domain_error"
    GENERATION_FAILED = "generation_failed"
    SAMPLING_FAILED = "sampling_failed"
    AUTODIFF_STATE = "autodiff_state"
    TRAINING_DIVERGED = "training_diverged"
    CHECKPOINT_INVALID = "checkpoint_invalid"
    DATASET_INVALID = "dataset_invalid"
    TRANSCRIPT_INVALID = "transcript_invalid"
    CHECK_FAILED = "check_failed"
    UNKNOWN = "unknown_error"


class ExitCode(IntEnum):
    """Process exit codes of the command surface."""

    OK = 0
    UNEXPECTED = 1
    CONFIG = 2
    DATA = 3
    TRAINING = 4
    CHECK_FAILED = 5


EXIT_CODES: dict[ErrorCode, ExitCode] = {
    ErrorCode.INVALID_CONFIG: ExitCode.CONFIG,
    ErrorCode.SHAPE_MISMATCH: ExitCode.CONFIG,
    ErrorCode.INVALID_GOAL: ExitCode.DATA,
    ErrorCode.DOMAIN_ERROR: ExitCode.DATA,
    ErrorCode.GENERATION_FAILED: ExitCode.DATA,
    ErrorCode.SAMPLING_FAILED: ExitCode.DATA,
    ErrorCode.DATASET_INVALID: ExitCode.DATA,
    ErrorCode.TRANSCRIPT_INVALID: ExitCode.DATA,
    ErrorCode.CHECKPOINT_INVALID: ExitCode.CONFIG,
    ErrorCode.AUTODIFF_STATE: ExitCode.TRAINING,
    ErrorCode.TRAINING_DIVERGED: ExitCode.TRAINING,
    ErrorCode.CHECK_FAILED: ExitCode.CHECK_FAILED,
    ErrorCode.UNKNOWN: ExitCode.UNEXPECTED,
}
