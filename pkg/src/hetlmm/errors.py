"""Package-wide exception types.

DataError marks invalid inputs (bad files, shapes, configuration) and maps to
CLI exit code 2; NumericalError marks solver/identifiability failures and
maps to exit code 3.
"""


class DataError(ValueError):
    """Invalid input data: shapes, values, file or config content."""


class NumericalError(RuntimeError):
    """Numerical failure: non-convergence or an unidentified direction."""
