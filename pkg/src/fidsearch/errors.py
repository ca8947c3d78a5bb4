"""Shared exception types.

Validation failures (bad input data, violated preconditions) raise
:class:`ValidationError`; genuine I/O problems propagate as ``OSError``.
The CLI maps the former to exit code 1 and the latter to exit code 2.
"""


class ValidationError(ValueError):
    """Input data or parameters violate a documented contract."""


class FormatError(ValidationError):
    """A file does not conform to its declared on-disk format."""
