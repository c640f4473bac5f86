"""Exception types shared across the package.

InputError covers everything caused by bad user input (malformed files,
inconsistent annotations, invalid configuration) and maps to CLI exit
code 1. Anything else that escapes is an internal error (exit code 2).
"""


class InputError(Exception):
    """Bad input data or configuration supplied by the caller."""


class ParseError(InputError):
    """A file could not be parsed; message carries path/line context."""


class ValidationError(InputError):
    """Parsed data violates a documented constraint."""
