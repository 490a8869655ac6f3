class DiffGameError(Exception):
    """Base class for all library errors."""


class ConfigError(DiffGameError, ValueError):
    pass


class InvalidActionError(DiffGameError, ValueError):
    pass


class NumericError(DiffGameError, ArithmeticError):
    pass


class OutOfBoxError(DiffGameError):
    """A DP transition from the reachable tube left the grid box."""


class EmptyLevelSetError(DiffGameError):
    """P1 violated: the level set has no point at the queried time."""

    def __init__(self, t, level):
        super().__init__(f"level set is empty at t={t!r} for level {level!r}")
        self.t = t
        self.level = level


class PreconditionError(DiffGameError):
    """An experiment refused to run, e.g. because Isaacs' condition fails."""
