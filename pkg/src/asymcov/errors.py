"""Exception hierarchy shared across the package."""


class AsymcovError(Exception):
    """Base class for all package errors."""


class DomainError(AsymcovError):
    """An argument is outside the mathematical domain of an operation."""


class ValidationError(AsymcovError):
    """A model specification or request fails its invariants."""


class NumericalError(AsymcovError):
    """A numerical procedure failed (factorization, quadrature, ...)."""

    def __init__(self, message, info=None):
        super().__init__(message)
        self.info = info
