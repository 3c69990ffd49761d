"""Exception hierarchy shared by every module."""


class AARError(Exception):
    """Base class for all package errors."""


class ConfigError(AARError):
    """Invalid scenario or parameter set. ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class NoContact(AARError):
    """The probe never reached the drogue's central plane."""


class NoiseBoundViolation(AARError):
    pass


class BoundViolation(AARError):
    pass


class NotSymmetric(ConfigError):
    pass


class NotNegativeDefinite(ConfigError):
    pass


class SingularMatrix(AARError):
    pass


class NoConvergence(AARError):
    pass


class NumericalDivergence(AARError):
    pass


class InsufficientSamples(AARError):
    pass


class SimTimeout(AARError):
    """No contact within the attempt's time budget."""
