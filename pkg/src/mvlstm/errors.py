"""Exception hierarchy shared by the library and the CLI."""


class MvLstmError(Exception):
    """Base class for user/data level failures (CLI exit code 1)."""


class ShapeError(MvLstmError, ValueError):
    """Operand dimensions are inconsistent."""


class DataError(MvLstmError, ValueError):
    """Input data is unusable (too short, constant column, bad CSV...)."""


class ConfigError(MvLstmError, ValueError):
    """Configuration is invalid or references missing files."""


class RankDeficientError(MvLstmError, ValueError):
    """Least-squares design matrix is not of full column rank."""

    def __init__(self, column: int, message: str | None = None):
        self.column = column
        super().__init__(message or f"design matrix is rank deficient at column {column}")


class UnstableSpecError(MvLstmError, ValueError):
    """Synthetic ARX spec has an autoregressive root on or outside the unit circle."""

    def __init__(self, root_magnitude: float, what: str = "target"):
        self.root_magnitude = root_magnitude
        super().__init__(
            f"unstable {what} recursion: root magnitude {root_magnitude:.6g} >= 1"
        )


class DivergenceError(MvLstmError, ArithmeticError):
    """A non-finite value appeared during forward, backward or training."""

    def __init__(self, message: str, *, step: int | None = None,
                 epoch: int | None = None, batch: int | None = None):
        self.step = step
        self.epoch = epoch
        self.batch = batch
        where = [f"{k}={v}" for k, v in (("epoch", epoch), ("batch", batch), ("step", step))
                 if v is not None]
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class InvariantError(Exception):
    """An internal invariant was violated (CLI exit code 2)."""
