"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible with an operation's contract."""


class GraphError(RuntimeError):
    """Backward invoked on something that is not a recorded scalar result."""


class NotTrainedError(RuntimeError):
    """A trained-state-only path (e.g. batch-norm inference) was used before training."""


class TrainingDiverged(RuntimeError):
    """A loss became non-finite during training."""


class FormatError(ValueError):
    """A persisted artifact is corrupt, truncated, or of the wrong version/config."""
