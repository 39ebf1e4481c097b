"""Exception types shared across the package."""


class InputError(ValueError):
    """An operation was called with inputs it rejects (bad dimension, unknown name)."""


class ModelError(ValueError):
    """A kinematic model file or structure failed validation."""


class TrajectoryError(ValueError):
    """A trajectory file failed to parse or validate.

    Carries the 1-based line number of the offending record when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
