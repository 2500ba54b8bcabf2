"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid parameters, configuration, or data contents."""


class ConfigError(ValidationError):
    """A parameter value violates its documented range."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class DataError(ValidationError):
    """A dataset manifest or image failed validation."""


class CheckpointError(ValidationError):
    """A checkpoint file is malformed or inconsistent with its header."""
