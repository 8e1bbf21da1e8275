from .core import (
    DelayEvaluation,
    Market,
    ServicePolicy,
    StationaryDistribution,
    delay_d,
    delay_g,
    social_welfare,
    stationary_distribution,
    t1_waiting_time,
    waiting_time,
    waiting_time_raw,
)
from .errors import (
    ConvergenceError,
    DomainError,
    EmptyEstimateError,
    InfeasibleRateError,
    InstabilityError,
    QueueModelError,
    RemovableSingularityError,
)

__version__ = "0.1.0"
