"""Exception types shared across the package."""


class RhevcalError(Exception):
    """Base class for all package-specific errors."""


class InvalidArrayError(RhevcalError):
    """Array description violates a structural constraint (e.g. too few elements)."""


class ConfigError(RhevcalError):
    """Inconsistent run configuration (schedule/array mismatch, bad index, empty grid)."""


class AliasingError(RhevcalError):
    """Requested harmonic order is not representable at the stream's sample rate."""


class DegenerateCurveError(RhevcalError):
    """Delay-power curve is flat; the modulated pair carries no usable contrast."""


class DeadChannelError(RhevcalError):
    """A channel produced zero harmonic power; its amplitude cannot be resolved."""


class InvalidCurveError(RhevcalError):
    """Rotation curve cannot be fit (non-positive mean power or no rotating component)."""


class ChannelCalibrationError(RhevcalError):
    """Calibration of one channel failed; carries the channel index."""

    def __init__(self, channel: int, cause: Exception):
        super().__init__(f"calibration failed for channel {channel}: {cause}")
        self.channel = channel
        self.cause = cause


class ConfigFileError(RhevcalError):
    """Config file failed to parse or validate (exit code 2 in the CLI)."""
