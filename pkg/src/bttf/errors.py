"""Exception hierarchy shared by all modules."""


class ParameterError(ValueError):
    """An argument violates a documented precondition."""


class ShapeError(ParameterError):
    def __init__(self, what: str, expected, got):
        super().__init__(f"{what}: expected {expected}, got {got}")
        self.expected = expected
        self.got = got


class InsufficientDataError(ParameterError):
    def __init__(self, message: str, splits: tuple = ()):
        super().__init__(message)
        self.splits = tuple(splits)


class ConfigError(ParameterError):
    pass


class DataFormatError(ValueError):
    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss!r})")
        self.epoch = epoch
        self.loss = loss


class PoolError(RuntimeError):
    def __init__(self, segment_index: int, cause: BaseException):
        super().__init__(f"refinement member for segment {segment_index} failed: {cause}")
        self.segment_index = segment_index
        self.cause = cause


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
