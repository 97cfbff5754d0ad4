"""Exception types shared across the package."""


class PulseFieldError(Exception):
    """Base class for all package errors."""


class ParameterError(PulseFieldError, ValueError):
    """A model or command parameter violates its constraint."""


class OutOfWindowError(PulseFieldError, IndexError):
    """A level or index lies outside the materialized window."""


class ResolutionError(PulseFieldError, ValueError):
    """The sampling grid is too coarse for the requested operation."""


class InsufficientDataError(PulseFieldError, ValueError):
    """Too few points for a regression."""


class DomainError(PulseFieldError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""
