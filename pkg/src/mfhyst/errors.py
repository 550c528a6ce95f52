"""Exception types shared across the package."""


class MfhystError(Exception):
    """Base class for all package errors."""


class DomainError(MfhystError, ValueError):
    """An argument lies outside the domain where the model is defined."""


class RangeError(MfhystError, ValueError):
    """A trajectory does not cover the requested time window."""


class ResourceError(MfhystError, RuntimeError):
    """A simulation would exceed its configured event budget."""


class NumericalError(MfhystError, ArithmeticError):
    """Step control or bracketing failed."""


class StatisticalError(MfhystError, RuntimeError):
    """Monte Carlo output is too thin to support the requested estimate."""


class ConfigError(MfhystError, ValueError):
    """An experiment configuration is missing or inconsistent."""
