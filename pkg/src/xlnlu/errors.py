"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes (config=2, data=3, numeric=4).
"""


class XlnluError(Exception):
    """Base class for all package errors."""


class ConfigError(XlnluError):
    """Invalid or inconsistent configuration."""


class DataError(XlnluError):
    """Malformed input files or inconsistent corpora/embeddings."""


class NumericError(XlnluError):
    """Numerical failure: non-finite loss, non-convergent decomposition."""
