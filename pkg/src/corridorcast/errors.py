"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: configuration problems exit 2, data
problems exit 3, training divergence exits 4.
"""


class CorridorcastError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(CorridorcastError):
    """Bad configuration: unknown keys, invalid parameter values, wiring mismatches."""


class DataError(CorridorcastError):
    """Bad input data."""


class FormatError(DataError):
    """Malformed input file (bad header, non-monotone timestamps, off-grid rows)."""


class UnknownSensorError(DataError):
    """Data references a sensor id absent from the metadata."""


class EmptyPanelError(DataError):
    """An operation produced or received a panel with no sensors."""


class EmptySeriesError(DataError):
    """A series has no observed values at all."""


class InsufficientDataError(DataError):
    """A series is too short for the requested operation."""


class TrainingDivergence(CorridorcastError):
    """Training loss blew up past the divergence guard."""
