"""Exception types shared across the package.

The CLI maps these onto process exit codes (config 2, data 3, solver 4).
"""


class ConfigError(ValueError):
    """Invalid configuration (bad flags, missing model paths, bad parameters)."""


class DataError(ValueError):
    """Malformed or inconsistent input data (recordings, model files)."""


class SolverError(RuntimeError):
    """Optimization failure (singular system, divergence)."""
