"""Exception hierarchy shared by every module."""


class LSREError(Exception):
    """Base class for all errors raised by the package."""


class ParameterError(LSREError, ValueError):
    pass


class DomainError(LSREError, ValueError):
    pass


class InvalidDesignError(LSREError):
    """A sample design contains a non-finite objective value."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class DegenerateFitError(LSREError):
    pass


class DegenerateDistributionError(LSREError):
    pass


class TrainingError(LSREError):
    pass


class ParseError(LSREError):
    """Malformed expression string; ``position`` is the offending offset."""

    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class ConfigurationError(LSREError):
    pass


class ProblemSetImportError(LSREError):
    def __init__(self, message, target_id=None):
        if target_id is not None:
            message = f"target {target_id}: {message}"
        super().__init__(message)
        self.target_id = target_id
