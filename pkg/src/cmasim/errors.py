"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Raised when a configuration document cannot be parsed or validated.

    ``field`` holds the dotted path of the offending entry when known
    (e.g. ``"transport.dt_s"``).
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class CalibrationError(RuntimeError):
    """Raised when a parameter fit cannot reach a usable regime."""
