"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    pass


class DegenerateInputError(ValueError):
    """Input for which the requested operation is singular (e.g. zero power)."""


class NotReadyError(RuntimeError):
    """Replay buffer holds fewer transitions than one batch."""


class NumericalDivergenceError(FloatingPointError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class IncompatibleCheckpointError(ValueError):
    pass


class CheckpointVersionError(IncompatibleCheckpointError):
    pass


class CheckpointCorruptError(IOError):
    pass


class ConfigError(ValueError):
    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class UnknownKeyError(ConfigError):
    pass


class OutOfRangeError(ConfigError):
    pass


class ConfigFileError(ConfigError):
    """Config file missing, unreadable or not valid TOML."""
