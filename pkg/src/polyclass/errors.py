"""Exception hierarchy for the polyclass pipeline."""


class PolyclassError(Exception):
    """Base class for all polyclass errors."""


class DecodeError(PolyclassError):
    """Raised when an image file is malformed."""


class UnsupportedFormatError(DecodeError):
    """Raised when an image file is in a format we do not handle."""


class DegenerateImageError(PolyclassError):
    """Raised when an image has no usable intensity structure (e.g. constant)."""


class NoObjectError(PolyclassError):
    """Raised when no foreground object / contour can be found."""


class DegenerateCoverError(PolyclassError):
    """Raised when a tangential cover has too few segments to define corners."""


class DegeneratePolygonError(PolyclassError):
    """Raised when a polygon has too few vertices for the requested operation."""


class SequenceTooLongError(PolyclassError):
    """Raised when a point sequence exceeds the positional-encoding horizon."""


class EmptySequenceError(PolyclassError):
    """Raised when a sequence has no unmasked positions."""


class IdxFormatError(PolyclassError):
    """Raised for malformed IDX dataset files (bad magic, truncation, count mismatch)."""


class DatasetError(PolyclassError):
    """Raised for unusable dataset layouts (empty root, empty class folder, ...)."""


class DatasetQualityError(PolyclassError):
    """Raised when too large a fraction of a dataset fails preprocessing."""


class ConfigError(PolyclassError):
    """Raised for invalid run configuration."""


class CheckpointError(PolyclassError):
    """Raised for malformed checkpoint files."""
