"""Exception vocabulary shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class InsufficientDataError(ValueError):
    """Not enough data to produce a meaningful result."""


class InvalidTopologyError(ValueError):
    """Network graph does not satisfy the requirements of the operation."""


class InvalidRouteError(ValueError):
    """Unicast destination is not a live neighbor of the sender."""


class NotFoundError(KeyError):
    """Requested entity (run id, edge, ...) does not exist."""


class ConvergenceFailure(RuntimeError):
    """Iteration cap reached before tolerance; carries the best iterate."""

    def __init__(self, message, best=None, stats=None):
        super().__init__(message)
        self.best = best
        self.stats = stats


class ConfigError(ValueError):
    """Scenario configuration problem; names the offending field."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
