"""Exception hierarchy shared by the library and the CLI.

Each class maps onto one CLI exit code, see :mod:`crtk.cli`.
"""


class CrtkError(Exception):
    """Base class for all toolkit errors."""


class ModelError(CrtkError, ValueError):
    """Invalid covariance model, domain or configuration."""


class DomainError(CrtkError, ValueError):
    """An argument lies outside the domain of a function."""


class NumericalFailure(CrtkError, RuntimeError):
    """Eigensolver, quadrature or root finding did not converge."""


class OracleError(NumericalFailure):
    """An independent oracle could not produce a trustworthy value."""


class RegimeRefusal(CrtkError):
    """The request is valid but falls in a regime the method cannot verify."""
