class MicroplanError(Exception):
    """Base class for errors raised by microplan."""


class ConfigError(MicroplanError, ValueError):
    """A catalog or project configuration is malformed."""


class ScenarioError(MicroplanError, ValueError):
    """A weather or load series failed validation."""


class MissingFileError(ScenarioError, FileNotFoundError):
    pass


class RaggedLengthError(ScenarioError):
    pass


class TimestampError(ScenarioError):
    """Timestamps are unparseable, not strictly increasing or not uniformly spaced."""


class NegativeValueError(ScenarioError):
    def __init__(self, column: str, row: int, value: float):
        self.column, self.row, self.value = column, row, value
        super().__init__(f"{column} has invalid value {value!r} at row {row}")


class ResourceLimitError(MicroplanError):
    """An instance exceeds a configured size or memory bound."""


class InfeasiblePlanError(MicroplanError):
    """No sizing in the search space satisfies the unserved and reserve caps."""

    def __init__(self, message: str, solution=None):
        super().__init__(message)
        self.solution = solution
