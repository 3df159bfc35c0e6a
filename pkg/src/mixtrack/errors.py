"""Exception types shared across the package."""


class MixtrackError(Exception):
    """Base class for all package-specific errors."""


class AllZeroWeights(MixtrackError):
    """Every raw particle weight in a component is zero (filter divergence)."""


class MissingModel(MixtrackError):
    """A mixture component has no transition model assigned."""


class DimensionMismatch(MixtrackError):
    """Input dimensionality does not match the model."""


class WindowTooLong(MixtrackError):
    """Observation sequence is not longer than the sliding window."""


class DegenerateData(MixtrackError):
    """Training data carries no variance; fit would be degenerate."""


class SingularCovariance(MixtrackError):
    """Covariance stayed singular even after jitter."""


class LengthMismatch(MixtrackError):
    """Paired sequences have different lengths."""


class ParseError(MixtrackError):
    """A data file could not be parsed; message names the offending line."""


class MissingColumn(MixtrackError):
    """A required CSV column is absent from the header."""


class VersionMismatch(MixtrackError):
    """Persisted model file has an unsupported schema version."""


class SchemaError(MixtrackError):
    """Persisted model file is structurally invalid."""
