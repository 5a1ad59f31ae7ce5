"""Exception types shared across the package.

The CLI maps these onto process exit codes, so every error a user can
trigger should be one of them.
"""


class VaeInfError(Exception):
    pass


class ShapeError(VaeInfError, ValueError):
    pass


class NonFiniteError(VaeInfError, ValueError):
    pass


class ConfigError(VaeInfError, ValueError):
    pass


class DataError(VaeInfError, ValueError):
    pass


class DivergenceError(VaeInfError, RuntimeError):
    def __init__(self, message, batch_index=None, epoch=None):
        super().__init__(message)
        self.batch_index = batch_index
        self.epoch = epoch


class ArtifactError(VaeInfError, ValueError):
    pass
