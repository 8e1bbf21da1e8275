"""Delay function, stationary distribution and welfare of the threshold queue.

Rates are normalised so that the high service rate and the delay cost are
both 1. The server works at ``mu_l`` while the number in system is at most
``T`` and at rate 1 above it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import DomainError, InfeasibleRateError, InstabilityError, RemovableSingularityError

MU_H = 1.0
DELAY_COST = 1.0
RAW_GUARD = 1e-6
DEFAULT_TAIL = 1e-14


@dataclass(frozen=True)
class ServicePolicy:
    T: int
    mu_l: float
    mu_h: float = MU_H

    def __post_init__(self):
        if isinstance(self.T, bool) or int(self.T) != self.T or self.T < 1:
            raise DomainError(f"threshold T must be a positive integer, got {self.T!r}")
        object.__setattr__(self, "T", int(self.T))
        if not 0.0 < self.mu_l < 1.0:
            raise DomainError(f"mu_l must lie in (0, 1), got {self.mu_l!r}")
        if self.mu_h != MU_H:
            raise DomainError("rates are normalised: mu_h must equal 1")

    def service_rate(self, n: int) -> float:
        """Rate in force when ``n >= 1`` customers are present."""
        return self.mu_l if n <= self.T else MU_H

    @cached_property
    def g_coefficients(self) -> np.ndarray:
        """Ascending coefficients of the delay numerator g."""
        T, m = self.T, self.mu_l
        c = np.zeros(T + 1)
        c[0] = m ** (T - 1)
        for j in range(1, T):
            c[T - j] = -(1.0 - m) * m ** (j - 1) * ((T - (j + 1)) * m + j - 1 - T)
        c[T] += -(T - 1) * (1.0 - m)
        return c

    @cached_property
    def d_coefficients(self) -> np.ndarray:
        """Ascending coefficients of the delay denominator d."""
        T, m = self.T, self.mu_l
        c = np.zeros(T + 1)
        c[0] = m ** T
        for j in range(T):
            c[T - j] += (1.0 - m) * m ** j
        return c


@dataclass(frozen=True)
class Market:
    R: float
    Lambda: float = 1.0
    C: float = DELAY_COST

    def __post_init__(self):
        if not self.R >= 0.0:
            raise DomainError(f"reward R must be >= 0, got {self.R!r}")
        if not self.Lambda > 0.0:
            raise DomainError(f"potential arrival rate Lambda must be > 0, got {self.Lambda!r}")
        if self.C != DELAY_COST:
            raise DomainError("costs are normalised: C must equal 1")

    @property
    def rate_cap(self) -> float:
        """Upper end of the feasible effective-rate interval, min(Lambda, 1)."""
        return min(self.Lambda, MU_H)


@dataclass(frozen=True)
class DelayEvaluation:
    lam: float
    w: float
    g_value: float
    d_value: float


@dataclass(frozen=True)
class StationaryDistribution:
    probabilities: np.ndarray
    truncation_level: int
    tail_mass_bound: float
    tail_mass: float

    def mean_number(self) -> float:
        n = np.arange(self.probabilities.size)
        return math.fsum(n * self.probabilities)

    def low_rate_busy_probability(self, T: int) -> float:
        """P(1 <= N <= T): server busy at the low rate."""
        return math.fsum(self.probabilities[1:T + 1])


def _check_rate(lam, *, unstable_is_domain=False):
    if not (lam >= 0.0):
        raise DomainError(f"arrival rate must be >= 0, got {lam!r}")
    if lam >= MU_H:
        if unstable_is_domain:
            raise DomainError(f"arrival rate must lie in [0, 1), got {lam!r}")
        raise InstabilityError(f"queue is unstable for lambda={lam!r} >= 1")


def delay_g(policy: ServicePolicy, lam: float) -> float:
    _check_rate(lam, unstable_is_domain=True)
    return float(P.polyval(lam, policy.g_coefficients))


def delay_d(policy: ServicePolicy, lam: float) -> float:
    _check_rate(lam, unstable_is_domain=True)
    return float(P.polyval(lam, policy.d_coefficients))


def w_values(policy: ServicePolicy, lam):
    """Unchecked, vectorised W(lambda); callers guarantee 0 <= lambda < 1."""
    return P.polyval(lam, policy.g_coefficients) / ((1.0 - lam) * P.polyval(lam, policy.d_coefficients))


def waiting_time(policy: ServicePolicy, lam: float) -> DelayEvaluation:
    """Expected sojourn time W(lambda) = g / ((1 - lambda) d)."""
    _check_rate(lam)
    g = float(P.polyval(lam, policy.g_coefficients))
    d = float(P.polyval(lam, policy.d_coefficients))
    return DelayEvaluation(lam=float(lam), w=g / ((1.0 - lam) * d), g_value=g, d_value=d)


def t1_waiting_time(mu_l: float, lam: float) -> float:
    """Closed-form delay for the threshold T = 1."""
    _check_rate(lam)
    return 1.0 / ((1.0 - lam) * (mu_l + lam * (1.0 - mu_l)))


def waiting_time_raw(policy: ServicePolicy, lam: float, guard: float = RAW_GUARD) -> float:
    """Unsimplified delay expression, kept only as a cross-check of :func:`waiting_time`.

    It has a removable singularity at ``lambda == mu_l`` and refuses to
    evaluate within ``guard`` of it.
    """
    _check_rate(lam)
    T, m = policy.T, policy.mu_l
    if abs(lam - m) < guard:
        raise RemovableSingularityError(f"|lambda - mu_l| < {guard}; use waiting_time instead")
    diff = m - lam
    lt = lam ** T
    num = (m ** T - (T + 1) * lt + lam / diff * (m ** T - lt)) / diff
    num += lt * (T + 1 - T * lam) / (1.0 - lam) ** 2
    den = (m ** (T + 1) - lam ** (T + 1)) / diff + lam ** (T + 1) / (1.0 - lam)
    return num / den


def stationary_distribution(policy: ServicePolicy, lam: float,
                            tail_bound: float = DEFAULT_TAIL) -> StationaryDistribution:
    """Truncated stationary law of the number in system.

    Levels up to ``T`` grow by ``lambda/mu_l``, later ones by ``lambda``; the
    truncation level is the smallest one whose geometric tail has mass below
    ``tail_bound``. Probabilities are normalised by the exact total mass, so
    the omitted tail is accounted for rather than spread over the kept levels.
    """
    _check_rate(lam)
    if not tail_bound > 0.0:
        raise DomainError("tail_bound must be > 0")
    T, m = policy.T, policy.mu_l
    if lam == 0.0:
        p = np.zeros(T + 1)
        p[0] = 1.0
        return StationaryDistribution(p, T, tail_bound, 0.0)

    log_r, log_lam = math.log(lam / m), math.log(lam)
    shift = max(0.0, T * log_r)  # log of the largest head weight
    head = np.exp(np.arange(T + 1) * log_r - shift)
    top = head[-1]
    total = math.fsum(head) + top * lam / (1.0 - lam)
    # mass beyond level T + extra is top * lam**(extra+1) / (1-lam)
    k = math.log(tail_bound * total * (1.0 - lam) / top) / log_lam
    extra = max(0, math.ceil(k) - 1)
    while top * lam ** (extra + 1) / (1.0 - lam) >= tail_bound * total:
        extra += 1
    tail = top * np.exp(np.arange(1, extra + 1) * log_lam)
    p = np.concatenate([head, tail]) / total
    tail_mass = top * lam ** (extra + 1) / (1.0 - lam) / total
    return StationaryDistribution(p, T + extra, tail_bound, tail_mass)


def social_welfare(policy: ServicePolicy, market: Market, lam: float) -> float:
    """Net benefit rate lambda * (R - W(lambda))."""
    _check_rate(lam)
    if lam > market.Lambda:
        raise InfeasibleRateError(f"lambda={lam!r} exceeds Lambda={market.Lambda!r}")
    if lam == 0.0:
        return 0.0
    return lam * (market.R - waiting_time(policy, lam).w)


def welfare_values(policy: ServicePolicy, R: float, lam):
    """Unchecked, vectorised welfare."""
    return lam * (R - w_values(policy, lam))
