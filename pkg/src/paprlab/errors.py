"""Exception types shared across the package."""


class DegenerateInputError(ValueError):
    """A signal or batch has no usable power (all-zero input, zero gain, ...)."""


class ConfigError(ValueError):
    """An experiment configuration field is missing, unknown or invalid."""


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss.

    Carries the zero-based epoch index at which divergence was detected.
    """

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")
