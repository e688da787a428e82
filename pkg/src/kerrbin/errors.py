"""Exception hierarchy shared by every module."""


class KerrbinError(Exception):
    """Base class for all errors raised by this package."""


class InvalidCutoffError(KerrbinError, ValueError):
    pass


class CutoffMismatchError(KerrbinError, ValueError):
    pass


class NormalizationError(KerrbinError, ValueError):
    pass


class StiffnessError(KerrbinError, RuntimeError):
    """The adaptive integrator could not take an acceptable step."""


class IntegrationError(KerrbinError, RuntimeError):
    """Propagation finished but violated a norm, trace or positivity gate."""


class NoSupportError(KerrbinError, ValueError):
    """Conditioning on a measurement outcome with (numerically) zero probability."""

    def __init__(self, message, probability=0.0):
        super().__init__(message)
        self.probability = probability


class ConfigError(KerrbinError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
