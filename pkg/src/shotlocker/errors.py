"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class ShotlockerError(Exception):
    """Base class for every error raised by this package."""


class ParseError(ShotlockerError):
    """A dataset, manifest, template, or config file failed to parse."""

    def __init__(self, message: str, *, path=None, line: int | None = None):
        location = ""
        if path is not None:
            location = str(path)
            if line is not None:
                location += f":{line}"
            location = f" ({location})"
        super().__init__(message + location)
        self.path = path
        self.line = line


class EmptyDatasetError(ShotlockerError):
    """A dataset file contained no records."""


class ConfigError(ShotlockerError):
    """A configuration value is inconsistent, missing, or out of range."""


class GeometryError(ShotlockerError):
    """Base class for vector-math errors."""


class DimensionMismatchError(GeometryError):
    pass


class DegenerateVectorError(GeometryError):
    """A zero vector was passed where a direction is required."""


class EmptyInputError(GeometryError):
    pass


class InsufficientDataError(GeometryError):
    """Too few rows to fit statistics."""


class EmbeddingFormatError(ShotlockerError):
    """An embedding file does not conform to the binary wire format."""


class InsufficientCandidatesError(ShotlockerError):
    """A label (or the whole index) holds fewer candidates than requested."""


class InsufficientWindowError(ShotlockerError):
    """A percentile rank window holds fewer candidates than requested."""


class UnknownRecordError(ShotlockerError):
    """A record id could not be resolved."""


class LeakageError(ShotlockerError):
    """The query itself appeared among the retrieved shots."""


class VerbalizerError(ShotlockerError):
    """A label has no entry in the active label map."""


class ScorerTransportError(ShotlockerError):
    """A remote scorer call failed after exhausting its retries."""

    def __init__(self, message: str, *, attempts: int, last_status: int | None = None):
        super().__init__(f"{message} (attempts={attempts}, last_status={last_status})")
        self.attempts = attempts
        self.last_status = last_status


class CassetteMissError(ShotlockerError):
    """Replay mode found no recorded response for a request."""


class ExperimentError(ShotlockerError):
    """A run aborted; the message names the failing stage and query id."""
