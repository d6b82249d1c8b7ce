"""Exception and warning types raised by the qme modules.

Every numerical failure derives from :class:`QMEError` so the command line
front end can map it onto a single exit status.
"""


class QMEError(Exception):
    """Base class for all numerical and validation failures."""


class NonSquare(QMEError, ValueError):
    pass


class DimensionMismatch(QMEError, ValueError):
    pass


class LengthNotSquare(QMEError, ValueError):
    """Vector length is not a perfect square, so it cannot be devectorized."""


class NonHermitian(QMEError, ValueError):
    pass


class NonHermitianHamiltonian(NonHermitian):
    pass


class EmptyNullSpace(QMEError):
    """No steady state found; a CPTP generator always has one."""


class DefectiveGenerator(QMEError):
    """Left/right eigenvectors could not be bi-orthonormalized."""


class StepSizeUnderflow(QMEError):
    pass


class JumpBudgetExceeded(QMEError):
    """Total jump probability per step reached 1; the time step is too large."""


class ZeroNorm(QMEError):
    pass


class DegenerateSpectrum(QMEError):
    pass


class TruncationNotConverged(QMEError):
    pass


class NonUnitaryPropagator(QMEError):
    pass


class NonUniqueSteadyState(QMEError):
    pass


class ConfigError(QMEError):
    """Invalid scenario configuration. ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class DegenerateBohrFrequencies(UserWarning):
    pass


class StepSizeWarning(UserWarning):
    pass


class TruncatedCorrelationWarning(UserWarning):
    pass
