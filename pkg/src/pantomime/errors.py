"""Exception types shared across the package.

Every raised error carries a human-readable message naming the offending
argument or config key; callers that need exit codes map these in the CLI.
"""


class PantomimeError(Exception):
    """Base class for all package errors."""


class UsageError(PantomimeError):
    """Caller violated a documented precondition (bad argument, wrong shape)."""


class DataError(PantomimeError):
    """Input data is malformed: non-finite values, wrong layout, bad file bytes."""


class ShapeError(PantomimeError):
    """Body shape parameters produce a degenerate skeleton (bone length <= 0)."""


class TrainingError(PantomimeError):
    """Optimization produced non-finite state; message includes the step index."""


class ConfigurationError(PantomimeError):
    """Run configuration is invalid; message names the offending key."""


class FileFormatError(DataError):
    """A container or skeleton file failed validation (magic, version, layout)."""
