"""Exceptions raised by the fresco library.

Every error derives from a builtin exception so callers that only know about
:class:`ValueError` or :class:`RuntimeError` keep working, and from
:class:`FrescoError` so the command line can map them to exit codes.
"""

from typing import Any


class FrescoError(Exception):
    """Base class of every error raised by fresco."""

    exit_code = 1


class DimensionError(FrescoError, ValueError):
    """Raised when array shapes are inconsistent."""


class InvalidSpecError(FrescoError, ValueError):
    """Raised when a degradation, estimator or network specification is invalid."""


class SamplingError(FrescoError, ValueError):
    """Raised when no valid patch center exists."""


class UndefinedMetricError(FrescoError, ValueError):
    """Raised when a quality metric is undefined for the given inputs."""


class ConfigError(FrescoError, ValueError):
    """Raised when a run configuration cannot be parsed or validated."""


class TensorFormatError(FrescoError, ValueError):
    """Raised when a tensor or checkpoint file is malformed."""


class NumericAbortError(FrescoError, RuntimeError):
    """Raised when an iterative solver produces non-finite values.

    Args:
        message (str): Diagnostic message.
        last_finite_iteration (int): Last iteration whose values were all finite.
        state (Any, optional): Last good solver state, if the solver kept one.
    """

    exit_code = 2

    def __init__(self, message: str, last_finite_iteration: int, state: Any = None):
        super().__init__(f"{message} (last finite iteration: {last_finite_iteration})")
        self.last_finite_iteration = last_finite_iteration
        self.state = state


class TuningError(FrescoError, RuntimeError):
    """Raised when every point of a hyperparameter grid diverged.

    Args:
        message (str): Diagnostic message.
        trace (list[tuple]): One ``(lambdas, error message)`` entry per grid point.
    """

    exit_code = 2

    def __init__(self, message: str, trace: list[tuple]):
        super().__init__(message)
        self.trace = trace
