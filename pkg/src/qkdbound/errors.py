"""Exception types raised across the package."""


class QKDBoundError(Exception):
    """Base class for all errors raised by qkdbound."""


class DimensionError(QKDBoundError, ValueError):
    """Operator shapes or subsystem dimensions do not match."""


class SingularOperandError(QKDBoundError, ArithmeticError):
    """A matrix logarithm was requested for an operator that is not strictly positive.

    The remedy is to evaluate the perturbed objective (``eps > 0``) instead.
    """


class ParameterError(QKDBoundError, ValueError):
    """A numeric parameter is outside its admissible range."""


class ConfigError(QKDBoundError, ValueError):
    """A protocol or map description is incomplete or inconsistent."""


class ValidationError(ConfigError):
    """A configuration file failed schema or physical validation."""


class ConsistencyError(QKDBoundError, ValueError):
    """Linearly dependent constraints carry contradictory values."""


class DomainError(QKDBoundError, ValueError):
    """An argument lies outside the domain of the objective (e.g. not PSD)."""


class InfeasibleProtocolError(QKDBoundError):
    """The observed statistics admit no density operator."""


class CertificateError(QKDBoundError):
    """A dual certificate could not be built or restored."""


class NumericalTroubleError(QKDBoundError):
    """The SDP solver failed in a way that yields no usable iterate."""
