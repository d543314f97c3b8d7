"""Exception types shared across the package."""


class PrefArbError(Exception):
    """Base class for package errors."""


class DataError(PrefArbError, ValueError):
    """Malformed, missing, or out-of-domain input data."""


class ConfigError(PrefArbError, ValueError):
    """Invalid configuration value."""


class ConsistencyError(PrefArbError, ValueError):
    """Preferences disagree with the utilities they claim to come from."""


class RankDeficiencyError(PrefArbError, ValueError):
    """Regressors are collinear."""
