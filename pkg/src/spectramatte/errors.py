"""Exception types shared across the pipeline."""


class PipelineError(Exception):
    """Base class for all spectramatte errors."""


class StructuralError(PipelineError):
    """Shape, channel-count, or other structural contract violation."""


class SequenceIOError(PipelineError):
    """Frame sequence could not be read or written."""


class CalibrationError(PipelineError):
    """Calibration matrix could not be built or is unusable."""


class PlateCoverageError(PipelineError):
    """Clean plate lacks matte-channel signal over too much of the frame."""

    def __init__(self, message, invalid_fraction=0.0, invalid_mask=None):
        super().__init__(message)
        self.invalid_fraction = invalid_fraction
        self.invalid_mask = invalid_mask


class ContractError(PipelineError):
    """Operation applied to an object in the wrong state."""


class ConfigError(PipelineError):
    """Invalid command-line or config-file input."""
