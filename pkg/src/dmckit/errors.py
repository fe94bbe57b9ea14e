"""Exception types shared across the toolkit."""


class DmckitError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(DmckitError, ValueError):
    """Array dimensions do not match the declared plant/controller sizes."""


class ConfigError(DmckitError, ValueError):
    """Scenario file or parameter set is invalid (CLI exit code 2)."""


class SingularityError(DmckitError, RuntimeError):
    """A matrix required to be invertible is numerically singular."""


class InfeasibleError(DmckitError, RuntimeError):
    """Constraint set is empty, or no feasible tuning exists (CLI exit code 4)."""


class ConvergenceError(DmckitError, RuntimeError):
    """An iterative solver hit its iteration cap before meeting tolerance."""


class InstabilityError(DmckitError, RuntimeError):
    """A closed-loop trace diverged (CLI exit code 3)."""
