"""
Error hierarchy for the PFGC toolkit.
Library code raises these; only the command line turns them into exit codes.
"""

from typing import Any, Optional


class PFGCError(Exception):
    """Root of every error raised by the toolkit."""

    exit_code = 1


class DataError(PFGCError):
    """Input data is present but unusable (NaN features, broken labels)."""


class GraphLoadError(DataError):
    """A dataset file is missing or cannot be parsed."""


class ShapeError(DataError, ValueError):
    """A matrix has the wrong shape or is not symmetric."""


class NumericalError(PFGCError):
    """A numerical routine failed (eigensolver, non-finite activations)."""


class TrainingAbortedError(NumericalError):
    """
    Training stopped on a NaN loss or divergence.

    Attributes:
        last_good_state: ModelState snapshot taken after the last finite epoch
        epoch: epoch at which training was aborted
    """

    def __init__(self, message: str, last_good_state: Optional[Any] = None, epoch: int = -1):
        super().__init__(message)
        self.last_good_state = last_good_state
        self.epoch = epoch


class ConfigError(PFGCError, ValueError):
    """A hyper-parameter or configuration key is invalid."""

    exit_code = 2


class UsageError(PFGCError, ValueError):
    """An operation was called outside its preconditions."""

    exit_code = 2
