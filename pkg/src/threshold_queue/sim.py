"""Event-level simulation of the threshold queue and best-response dynamics.

The simulator is an independent statistical check of the analytic delay: it
never touches the closed-form expressions. Service clocks are restarted at the
new rate whenever the number in system crosses the threshold, which by
memorylessness realises exactly the birth-death chain.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .core import Market, ServicePolicy, w_values
from .errors import DomainError, EmptyEstimateError, InstabilityError

BATCHES = 32
CHUNK = 1 << 16
STABILITY_MARGIN = 1e-3
DEFAULT_GAMMA = 0.1
STEP_TOL = 1e-6


@dataclass(frozen=True)
class SimConfig:
    policy: ServicePolicy
    lam: float
    horizon_customers: int
    warmup_customers: int | None = None  # default: 1% of the horizon
    seed: int = 0

    def __post_init__(self):
        if self.horizon_customers < 1:
            raise DomainError("horizon_customers must be positive")
        if self.warmup_customers is None:
            object.__setattr__(self, "warmup_customers", self.horizon_customers // 100)
        if not 0 <= self.warmup_customers < self.horizon_customers:
            raise DomainError("need 0 <= warmup_customers < horizon_customers")
        if self.seed < 0:
            raise DomainError("seed must be non-negative")


@dataclass(frozen=True)
class SimEstimate:
    mean_sojourn: float
    half_width_95: float
    customers_served: int
    fraction_time_low_rate: float
    std_error: float
    fraction_std_error: float
    batches: int

    def half_width(self, level: float = 0.95) -> float:
        return _t_quantile(level, self.batches) * self.std_error

    def fraction_half_width(self, level: float = 0.95) -> float:
        return _t_quantile(level, self.batches) * self.fraction_std_error


def _t_quantile(level, batches):
    return float(stats.t.ppf(0.5 + level / 2.0, batches - 1))


def simulate(config: SimConfig, batches: int = BATCHES) -> SimEstimate:
    """Run the queue until ``horizon_customers`` have departed.

    Sojourn times of the customers after the first ``warmup_customers``
    departures are split into ``batches`` contiguous batches for a batch-means
    confidence interval. ``fraction_time_low_rate`` is the share of
    post-warmup time with 1 <= N <= T, i.e. the server busy at ``mu_l``.
    """
    lam = config.lam
    if not lam >= 0.0:
        raise DomainError(f"arrival rate must be >= 0, got {lam!r}")
    if lam >= 1.0:
        raise InstabilityError(f"queue is unstable for lambda={lam!r} >= 1")
    if lam == 0.0:
        raise EmptyEstimateError("no arrivals: the mean sojourn time is undefined")
    policy = config.policy
    T, mu_l = policy.T, policy.mu_l
    horizon, warmup = config.horizon_customers, config.warmup_customers
    kept = horizon - warmup
    if kept < batches:
        raise DomainError(f"need at least {batches} post-warmup customers")
    per_batch = kept // batches
    used = per_batch * batches

    rng = np.random.default_rng(config.seed)
    expo, unif, k = [], [], CHUNK
    low_rate_total, high_rate_total = lam + mu_l, lam + 1.0
    p_arr_low, p_arr_high = lam / low_rate_total, lam / high_rate_total

    t = 0.0
    n = 0
    departed = 0
    arrivals = deque()
    batch_sum = batch_low = batch_time = 0.0
    sums, lows, times = [], [], []
    total_sojourn = 0.0
    counting = warmup == 0

    while departed < horizon:
        if k == CHUNK:
            expo = rng.standard_exponential(CHUNK).tolist()
            unif = rng.random(CHUNK).tolist()
            k = 0
        e, u = expo[k], unif[k]
        k += 1
        if n == 0:
            dt = e / lam
            t += dt
            if counting:
                batch_time += dt
            n = 1
            arrivals.append(t)
            continue
        if n <= T:
            dt = e / low_rate_total
            is_arrival = u < p_arr_low
            if counting:
                batch_low += dt
                batch_time += dt
        else:
            dt = e / high_rate_total
            is_arrival = u < p_arr_high
            if counting:
                batch_time += dt
        t += dt
        if is_arrival:
            n += 1
            arrivals.append(t)
            continue
        n -= 1
        soj = t - arrivals.popleft()
        departed += 1
        if not counting:
            counting = departed == warmup
            continue
        total_sojourn += soj
        if departed - warmup <= used:
            batch_sum += soj
            if (departed - warmup) % per_batch == 0:
                sums.append(batch_sum)
                lows.append(batch_low)
                times.append(batch_time)
                batch_sum = batch_low = batch_time = 0.0

    means = np.asarray(sums) / per_batch
    fracs = np.asarray(lows) / np.asarray(times)
    se = float(means.std(ddof=1) / math.sqrt(batches))
    fse = float(fracs.std(ddof=1) / math.sqrt(batches))
    frac = math.fsum(lows) / math.fsum(times)
    return SimEstimate(
        mean_sojourn=total_sojourn / kept,
        half_width_95=_t_quantile(0.95, batches) * se,
        customers_served=kept,
        fraction_time_low_rate=frac,
        std_error=se,
        fraction_std_error=fse,
        batches=batches,
    )


@dataclass(frozen=True)
class DynamicsTrace:
    iterates: tuple
    converged_to: float | None
    step_size: float


def best_response(policy: ServicePolicy, market: Market, lam: float,
                  margin: float = STABILITY_MARGIN) -> float:
    """Best-response aggregate rate: everyone joins if W < R, nobody if W > R."""
    w = float(w_values(policy, lam))
    if w < market.R:
        return min(market.Lambda, 1.0 - margin)
    if w > market.R:
        return 0.0
    return lam


def best_response_dynamics(policy: ServicePolicy, market: Market, lambda_init: float,
                           gamma: float = DEFAULT_GAMMA, iterations: int = 10_000,
                           margin: float = STABILITY_MARGIN, tol: float = STEP_TOL) -> DynamicsTrace:
    """Damped adjustment ``lam <- lam + step * (B(lam) - lam)`` towards the best response.

    ``step`` starts at ``gamma`` and is halved each time the direction of
    adjustment reverses; with a fixed step the bang-bang best response makes
    the iterates chatter around a stable equilibrium at an amplitude of order
    ``gamma``. Halving only on reversals leaves the drift away from an
    unstable equilibrium untouched.
    """
    if not 0.0 < gamma <= 1.0:
        raise DomainError("gamma must lie in (0, 1]")
    cap = min(market.Lambda, 1.0 - margin)
    if not 0.0 <= lambda_init <= min(market.Lambda, 1.0):
        raise DomainError(f"lambda_init={lambda_init!r} outside the feasible range")
    lam = min(float(lambda_init), cap)
    trace = [lam]
    step = gamma
    direction = 0.0
    converged = None
    for _ in range(iterations):
        move = best_response(policy, market, lam, margin) - lam
        if move == 0.0:
            converged = lam
            break
        if direction and (move > 0.0) != (direction > 0.0):
            step *= 0.5
        direction = move
        new = min(max(lam + step * move, 0.0), cap)
        trace.append(new)
        if abs(new - lam) < tol:
            converged = new
            lam = new
            break
        lam = new
    return DynamicsTrace(iterates=tuple(trace), converged_to=converged, step_size=gamma)
