"""Error taxonomy mapped to CLI exit codes (config=2, data=3, numerical=4)."""


class ConfigError(ValueError):
    """Invalid configuration: bad key, value out of range, inconsistent setup."""

    exit_code = 2


class DataError(ValueError):
    """Malformed or inconsistent input data (events, matrices, traces)."""

    exit_code = 3


class NumericalError(RuntimeError):
    """A numerical procedure failed (divergence, non-finite values, SVD failure)."""

    exit_code = 4
