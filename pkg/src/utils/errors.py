"""
Error hierarchy shared by every package.
The CLI catches UKanError and reports it as a user error.
"""


class UKanError(Exception):
    """Base class for all expected failures."""


class ShapeError(UKanError, ValueError):
    pass


class NonFiniteError(UKanError, FloatingPointError):
    pass


class TapeError(UKanError):
    pass


class GridError(UKanError, ValueError):
    pass


class IntegrationError(UKanError):
    def __init__(self, message: str, step: int = None):
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)


class ConfigError(UKanError, ValueError):
    pass


class DataError(UKanError):
    def __init__(self, message: str, path=None):
        self.path = path
        if path is not None:
            message = f"{message}: {path}"
        super().__init__(message)


class CheckpointError(UKanError):
    pass


class TrainingError(UKanError):
    def __init__(self, message: str, epoch: int = None, step: int = None):
        self.epoch = epoch
        self.step = step
        where = []
        if epoch is not None:
            where.append(f"epoch {epoch}")
        if step is not None:
            where.append(f"step {step}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
