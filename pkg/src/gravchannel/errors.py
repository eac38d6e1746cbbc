"""Exception types raised by the simulators."""


class NumericalFailure(RuntimeError):
    """Base class for failures that signal a numerical (not user) problem."""


class NotDissipative(NumericalFailure):
    """The drift matrix is not Hurwitz, so no Gaussian steady state exists."""


class LeakageError(NumericalFailure):
    """Population reached the top levels of the truncated Fock basis."""


class CovarianceViolation(NumericalFailure):
    """A covariance matrix violated the uncertainty relation."""


class NormCollapse(NumericalFailure):
    """A stochastic step shrank the state norm below the allowed bound."""


class StepSizeError(NumericalFailure):
    """The integrator could not reach the requested accuracy."""
