"""Exception types shared across the package.

The CLI maps these onto process exit codes: ValidationError -> 2,
I/O errors (OSError) -> 3, NumericalError -> 4.
"""


class SbrError(Exception):
    """Base class for solver errors."""


class ValidationError(SbrError):
    """Bad configuration, malformed input file, or violated precondition."""


class NumericalError(SbrError):
    """Non-finite intermediate or non-convergent series."""
