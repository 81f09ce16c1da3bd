"""Exception hierarchy of the adapter package."""


class AdapterError(Exception):
    """Base class for every error this package raises on purpose."""


class FormatError(AdapterError):
    """A tensor or label file does not follow the exchange format."""


class ManifestError(AdapterError):
    """A dataset manifest is missing, malformed, or inconsistent."""


class PredictionError(AdapterError):
    """A predict_fn return value cannot be written as a label map."""
