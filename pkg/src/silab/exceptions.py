"""Application-specific exceptions raised by silab."""

from __future__ import annotations

from typing import ClassVar


class SilabError(Exception):
    """Base application error."""

    exit_code: ClassVar[int] = 5

    def __init__(self, message: str, *, stage: str | None = None) -> None:
        """Store the message and the pipeline stage that raised it."""
        super().__init__(message)
        self.stage = stage

    def with_stage(self, stage: str) -> SilabError:
        """Label the error with a pipeline stage unless one is already set."""
        if self.stage is None:
            self.stage = stage
        return self

    def __str__(self) -> str:
        """Prefix the message with the stage label when present."""
        message = super().__str__()
        return f"[{self.stage}] {message}" if self.stage else message


class DataError(SilabError):
    """Raised for malformed input data."""

    exit_code = 2


class DimensionMismatch(DataError):
    """Array lengths do not agree with the declared dimensions."""


class NonBinaryResponse(DataError):
    """The response contains values outside {0, 1}."""


class NonFiniteCovariate(DataError):
    """The design matrix contains NaN or infinite entries."""


class IndexOutOfRange(DataError):
    """A covariate index falls outside `[0, d)`."""


class UnknownColumnError(DataError):
    """A named CSV column does not exist."""


class MissingValueError(DataError):
    """The input file has missing cells."""


class ValidationError(SilabError):
    """Raised for malformed user configuration."""

    exit_code = 2


class InvalidAlpha(ValidationError):
    """The significance level is not in `(0, 1)`."""


class InvalidSparsity(ValidationError):
    """The sparsity level does not follow the simulation pattern."""


class EstimationError(SilabError):
    """Base error for numerical estimation failures."""

    exit_code = 3


class SeparationDetected(EstimationError):
    """The likelihood has no interior maximizer."""


class SingularInformation(EstimationError):
    """The Fisher information could not be factorized, even with a ridge."""


class MaxIterExceeded(EstimationError):
    """An iterative solver ran out of iterations."""


class InitialMleFailed(EstimationError):
    """The MLE on observed data did not exist or did not converge."""


class TooManySkippedSamples(EstimationError):
    """Too many simulated samples had to be redrawn in one iteration."""


class BracketingInfeasible(SilabError):
    """No regularization range satisfies the support-size brackets."""

    exit_code = 3


class QualityGateError(SilabError):
    """A Monte-Carlo run failed too many replications."""

    exit_code = 4
