"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: input problems exit with 2, resource
guards with 3 and internal assertions with 4.
"""


class ConicBundleError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 4


class InvalidArgument(ConicBundleError, ValueError):
    exit_code = 2


class InvalidField(InvalidArgument):
    """The modulus of a number field is reducible over Q."""


class RankError(InvalidArgument):
    """A quadratic form does not have the rank an operation requires."""


class DegenerateSurface(InvalidArgument):
    pass


class ParseError(InvalidArgument):
    pass


class Unsupported(ConicBundleError):
    """The input is valid but outside what the implementation handles."""

    exit_code = 2


class ResourceLimit(ConicBundleError):
    exit_code = 3


class InternalError(ConicBundleError, AssertionError):
    exit_code = 4
