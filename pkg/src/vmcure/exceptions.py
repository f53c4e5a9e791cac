"""Exception types shared across the package."""


class VmcureError(Exception):
    """Base class for all package errors."""


class DataError(VmcureError):
    """Invalid input data or schema; carries a row number when known."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class ConfigError(VmcureError):
    """Malformed model configuration."""


class FitError(VmcureError):
    """A solver failed in a way that cannot be expressed as a diagnostic flag."""
