"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class NotPSDError(DomainError):
    pass


class SingularError(DomainError):
    pass


class SupportError(DomainError):
    """Observation outside the support of a family."""


class DegenerateDataError(DomainError):
    """Sample for which the MLE does not exist (e.g. constant data)."""


class ContractError(ValueError):
    """Shape/size mismatch between arguments."""


class CapacityError(ValueError):
    """Problem too large for the requested solver."""


class EvaluationError(ArithmeticError):
    """A user callback produced a non-finite value."""

    def __init__(self, msg, theta=None, x=None):
        super().__init__(msg)
        self.theta = theta
        self.x = x


class ExperimentError(RuntimeError):
    """Failure inside one (n, repetition) task of an experiment."""

    def __init__(self, msg, n=None, repetition=None):
        super().__init__(msg)
        self.n = n
        self.repetition = repetition


class CloudParseError(ContractError):
    """Malformed point-cloud file; ``line`` is 1-based."""

    def __init__(self, msg, path=None, line=None):
        super().__init__(f"{path}:{line}: {msg}" if line is not None else msg)
        self.path = path
        self.line = line
