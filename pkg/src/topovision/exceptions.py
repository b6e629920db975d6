"""Exception types shared across the package."""


class ImageFormatError(ValueError):
    """Raised when an input file is not an image format we can read."""


class MalformedComplexError(ValueError):
    """Raised when a skeleton complex fails an internal consistency check."""


class DivergenceError(RuntimeError):
    """Raised when training produces a non-finite loss.

    Carries the optimization step at which divergence was detected.
    """

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite loss at training step {step}")


class OptimizerError(RuntimeError):
    """Raised when the population optimizer cannot continue."""


class CheckpointError(ValueError):
    """Raised when a model checkpoint file is malformed or unsupported."""


class ConfigError(ValueError):
    """Raised for invalid configuration files or option values."""


class StageError(RuntimeError):
    """Raised when a pipeline stage fails.

    Carries the stage name so the CLI can report where the run stopped.
    """

    def __init__(self, stage, message):
        self.stage = stage
        super().__init__(f"stage '{stage}' failed: {message}")
