"""Exception types raised across the package."""

import numpy as np


class DegenerateDistributionError(ValueError):
    """A categorical distribution has no mass (all-zero, NaN or -inf weights)."""


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """A matrix expected to be symmetric positive-definite failed Cholesky."""


class FeatureFileError(ValueError):
    """A feature file could not be parsed or failed validation.

    ``line`` is the 1-based line number of the offending row when known.
    """

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class InconsistentCountError(FeatureFileError):
    """Agents in a feature file do not hold the same set of objects."""


class ConfigError(ValueError):
    """Invalid experiment or game configuration."""
