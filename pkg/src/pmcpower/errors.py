"""Exception hierarchy shared across the package."""


class PmcPowerError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(PmcPowerError):
    """A trace, manifest, or model file could not be parsed."""


class AggregationError(PmcPowerError):
    """Counter and power traces could not be combined into a run record."""


class IsolationError(PmcPowerError):
    """Target power could not be isolated from the total measurement."""


class DegenerateSeriesError(PmcPowerError):
    """A statistic was requested on a zero-variance or too-short series."""


class FeatureError(PmcPowerError):
    """A feature spec is invalid or cannot be evaluated on the given data."""


class ClusteringError(PmcPowerError):
    """Clustering input violated its preconditions."""


class ModelFileError(PmcPowerError):
    """A model file is corrupted or has an unsupported schema version."""


class ConfigError(PmcPowerError):
    """A run configuration value is missing or out of range."""
