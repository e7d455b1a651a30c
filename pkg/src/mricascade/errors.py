"""Exception types shared across the package."""


class InvalidShapeError(ValueError):
    """An array argument has the wrong shape or dimensionality."""


class InvalidParameterError(ValueError):
    """A scalar or configuration argument is outside its valid range."""


class InvalidStateError(RuntimeError):
    """An operation was called with stale or mismatched internal state."""


class CheckpointFormatError(ValueError):
    """A checkpoint file is malformed or inconsistent with its header."""


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss.

    Carries a ``diagnostics`` dict (epoch, step, loss, parameter norms) so
    the failure point can be inspected.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
