"""Exception hierarchy shared by every module."""


class QueueModelError(Exception):
    """Base class for all errors raised by threshold_queue."""

    code = "MODEL_ERROR"


class DomainError(QueueModelError, ValueError):
    code = "DOMAIN_ERROR"


class InstabilityError(DomainError):
    """Effective arrival rate reaches the high service rate (lambda >= 1)."""

    code = "INSTABILITY"


class InfeasibleRateError(DomainError):
    """Arrival rate exceeds the potential rate Lambda."""

    code = "INFEASIBLE_RATE"


class RemovableSingularityError(DomainError):
    """The unsimplified delay expression was evaluated too close to lambda = mu_l."""

    code = "REMOVABLE_SINGULARITY"


class EmptyEstimateError(QueueModelError, ValueError):
    code = "EMPTY_ESTIMATE"


class ConvergenceError(QueueModelError, RuntimeError):
    """An iterative method ran out of budget; ``best`` holds the best bracket or iterate."""

    code = "CONVERGENCE"

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
