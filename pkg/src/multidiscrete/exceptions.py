"""Exception hierarchy. Domain failures map to CLI exit code 1."""


class MultiDiscreteError(Exception):
    """Base class for domain failures."""


class SpecError(MultiDiscreteError, ValueError):
    """A marginal specification or correlation matrix is invalid."""


class DegenerateMarginError(MultiDiscreteError, ValueError):
    """A margin collapses to a binary variable with probability 0 or 1."""


class InfeasibleCorrelationError(MultiDiscreteError):
    """Target correlations fall outside attainable bounds.

    ``report`` carries the :class:`~multidiscrete.corr_bounds.BoundsReport`
    when one was computed.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class CalibrationError(MultiDiscreteError):
    """Intermediate binary correlation search did not converge."""

    def __init__(self, message, calibrations=None):
        super().__init__(message)
        self.calibrations = calibrations


class RepairError(MultiDiscreteError):
    """Nearest positive-definite repair failed to converge."""


class EstimationError(MultiDiscreteError):
    """Method-of-moments estimates are undefined for the sample."""
