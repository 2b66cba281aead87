"""Exception classes shared across the toolkit.

Each class carries the CLI exit code it maps to.
"""


class SdmError(Exception):
    exit_code = 1


class UsageError(SdmError):
    exit_code = 2


class MissingInputError(SdmError, FileNotFoundError):
    exit_code = 3


class DataError(SdmError, ValueError):
    exit_code = 4


class NumericError(SdmError, ArithmeticError):
    exit_code = 5
