"""Exception hierarchy shared by all modules."""


class ParametrixError(Exception):
    """Base class for library errors."""


class QuadratureError(ParametrixError):
    """Quadrature failed to reach the requested tolerance."""

    def __init__(self, message: str, partial: float = float("nan"), achieved: float = float("nan")):
        super().__init__(f"{message} (partial={partial!r}, achieved_error={achieved!r})")
        self.partial = partial
        self.achieved = achieved


class RangeError(ParametrixError):
    """A bracket or search interval could not be established."""


class DomainError(ParametrixError, ValueError):
    """An argument lies outside the domain of the operation."""


class AssumptionViolation(ParametrixError):
    """Declared parameters violate the structural assumptions."""


class ResolutionError(ParametrixError):
    """Discretization cannot reach the requested accuracy."""


class BudgetError(ParametrixError):
    """Series truncation tail exceeds the requested tolerance."""


class UnsupportedError(ParametrixError):
    """Requested combination of inputs is outside the implemented scope."""


class ConfigError(ParametrixError):
    """Malformed or inconsistent run configuration."""
