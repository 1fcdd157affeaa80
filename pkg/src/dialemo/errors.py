"""Exception types shared across the package."""


class DataError(Exception):
    """Malformed or invalid input data (corpus files, pairs files, tweets).

    The CLI maps this to exit code 2.
    """


class ParseError(DataError):
    """Structurally malformed input; carries a byte offset when known."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ConfigError(ValueError):
    """Invalid configuration value or combination."""


class TrainingDiverged(RuntimeError):
    """Training aborted because the loss became non-finite."""
