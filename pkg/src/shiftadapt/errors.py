"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes (see expcli.cli), so library code
should raise the most specific class that applies rather than bare ValueError
for anything a user can trigger through data or configuration.
"""


class ShiftAdaptError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ShiftAdaptError):
    """Invalid, unknown, or inconsistent configuration."""


class DataError(ShiftAdaptError):
    """Malformed manifests, volumes, or degenerate inputs."""


class TrainingDivergedError(ShiftAdaptError):
    """Non-finite loss encountered; carries diagnostic context."""

    def __init__(self, message, *, epoch=None, batch=None, loss=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
