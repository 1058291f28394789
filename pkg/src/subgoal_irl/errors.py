"""Exception types shared across the package."""


class SubgoalIrlError(Exception):
    """Base class for all package errors."""


class InputError(SubgoalIrlError, ValueError):
    """An operation received an argument violating its preconditions."""


class ConfigError(SubgoalIrlError, ValueError):
    """A configuration file or object is inconsistent."""


class NoPathError(SubgoalIrlError):
    """No path exists between two states of the deterministic transition graph."""

    def __init__(self, start: int, goal: int):
        self.start = start
        self.goal = goal
        super().__init__(f"no path from state {start} to state {goal}")


class TrainingDivergedError(SubgoalIrlError):
    """Parameters or gradients became non-finite during a fit."""

    def __init__(self, iteration: int, detail: str = ""):
        self.iteration = iteration
        msg = f"training diverged at iteration {iteration}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class PhaseError(SubgoalIrlError):
    """A session operation was attempted in the wrong phase."""

    def __init__(self, expected, actual: str):
        self.expected = expected
        self.actual = actual
        super().__init__(f"operation requires phase {expected}, session is in {actual!r}")
