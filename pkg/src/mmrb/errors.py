"""Exception hierarchy.

Everything raised on purpose derives from :class:`MmrbError` so callers can
catch one base type. ``ParameterError`` doubles as ``ValueError`` because most
of its call sites are plain argument validation.
"""

from __future__ import annotations


class MmrbError(Exception):
    """Base class for all benchmark errors."""


class ParameterError(MmrbError, ValueError):
    """A scalar argument or field is out of its documented domain."""


class ConfigError(MmrbError):
    """A run configuration document violates its schema."""


class ManifestError(MmrbError):
    """A dataset manifest is malformed or references missing files."""


class TensorFormatError(MmrbError):
    """An on-disk tensor cannot be decoded, or fails its range check."""


class MetricError(MmrbError):
    """Scoring failed: shape/class mismatch or nothing to evaluate."""


class ScenarioError(MmrbError):
    """A corruption scenario is internally inconsistent."""


class PredictorError(MmrbError):
    """A predictor crashed, timed out, or produced unusable output."""

    def __init__(self, message: str, *, scenario: str | None = None,
                 sample: str | None = None, exit_status: int | None = None):
        parts = [message]
        if scenario is not None:
            parts.append(f"scenario={scenario}")
        if sample is not None:
            parts.append(f"sample={sample}")
        if exit_status is not None:
            parts.append(f"exit_status={exit_status}")
        super().__init__(" ".join(parts))
        self.scenario = scenario
        self.sample = sample
        self.exit_status = exit_status


class MissingCombinationError(MmrbError):
    """A metric record does not cover every modality combination."""

    def __init__(self, missing: tuple[tuple[str, ...], ...]):
        labels = ", ".join("{" + ",".join(m) + "}" for m in missing)
        super().__init__(f"record is missing {len(missing)} combination(s): {labels}")
        self.missing = missing
