"""Exception hierarchy shared by all modules."""


class FracDNError(Exception):
    """Base class for all package errors."""


class ConfigurationError(FracDNError, ValueError):
    pass


class GeometryError(FracDNError, ValueError):
    pass


class DataError(FracDNError, ValueError):
    pass


class ParameterError(FracDNError, ValueError):
    pass


class NumericError(FracDNError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance.

    ``diagnostics`` carries whatever the failing routine could report
    (achieved error estimate, cut-offs, iteration counts).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
