"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line front end:
2 for configuration problems, 3 for bad data, 4 for numeric degeneracy.
"""


class DfassocError(Exception):
    exit_code = 1


class ConfigError(DfassocError, ValueError):
    exit_code = 2


class ParameterError(ConfigError):
    """A tuning parameter (k, bandwidth, alpha, ...) is out of range."""


class UnsupportedError(ConfigError):
    """The requested model, kernel or method combination is not available."""


class OracleSizeError(ConfigError):
    """A brute-force oracle was asked for an instance that is too large."""


class CacheKeyError(ConfigError):
    """A null table does not match the configuration it is used with."""


class DataError(DfassocError, ValueError):
    exit_code = 3


class ShapeError(DataError):
    pass


class SizeError(DataError):
    pass


class DegenerateInputError(DataError):
    """Duplicate points: the optimal assignment / neighbor graph is not unique."""


class SchemaError(DataError):
    pass


class ParseError(DataError):
    pass


class NumericDegeneracyError(DfassocError, ArithmeticError):
    exit_code = 4


class DegenerateDenominatorError(NumericDegeneracyError):
    """The kernel is constant on the sample, so the ratio estimate is 0/0."""
