"""Exception types shared across the package."""


class CaschedError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(CaschedError, ValueError):
    pass


class DomainError(CaschedError, ValueError):
    pass


class NoCoverageError(CaschedError, ValueError):
    pass


class EmptyScenarioError(CaschedError):
    pass


class ContractViolation(CaschedError, ValueError):
    pass


class ConvergenceError(CaschedError, RuntimeError):
    """Raised when the stage solver hits its iteration cap.

    The best iterate found so far is kept on ``best_phi`` / ``best_value``
    so callers can still inspect it.
    """

    def __init__(self, message, best_phi=None, best_value=None, residual=None):
        super().__init__(message)
        self.best_phi = best_phi
        self.best_value = best_value
        self.residual = residual


class ScenarioError(CaschedError, ValueError):
    """Scenario file could not be parsed or failed validation.

    ``location`` is a dotted field path (``users[2].utility.r_max``) or a
    ``line:column`` pair for syntax errors.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)
