"""Socially optimal arrival rates: maximising S(lambda) = lambda (R - W(lambda)).

S can have two local maxima, one at a low rate where the server idles at
``mu_l`` and one at a high rate where it mostly runs fast, so the optimiser
scans a dense grid and refines every grid-local maximum.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Market, ServicePolicy, t1_waiting_time, w_values, welfare_values
from .equilibrium import find_equilibria, t1_case, t1_roots
from .errors import DomainError
from .numerics import DIFF_STEP, golden_section_max, second_difference

WELFARE_GRID = 10_000
REFINE_XTOL = 1e-10
TIE_RTOL = 1e-12
ORDER_TOL = 1e-9


@dataclass(frozen=True)
class WelfareOptimum:
    lambda_star: float
    value: float
    foc_residual: float
    local_maxima: tuple  # (rate, value) pairs, ascending rate
    bimodal: bool
    boundary: bool


@dataclass(frozen=True)
class OptimumComparison:
    lambda_star: float
    eq_min: float
    eq_max: float
    relation: str  # "below", "between" or "above" the equilibrium range
    t1_bound: float | None = None
    t1_bound_holds: bool | None = None


@dataclass(frozen=True)
class T1WelfareReport:
    mu_l: float
    R: float
    concave_on_grid: bool
    tail_case: str | None  # "lambda_0", "lambda_1" or None
    tail_start: float | None
    tail_decreasing_concave: bool | None


def _feasible_grid(market, n):
    cap = market.rate_cap
    if market.Lambda < 1.0:
        return np.linspace(0.0, cap, n)  # q = 1 is allowed
    return np.arange(n) * (cap / n)


def optimize_welfare(policy: ServicePolicy, market: Market, grid: int = WELFARE_GRID) -> WelfareOptimum:
    """Global maximiser of social welfare over the feasible rates.

    Every grid-local maximum is polished by golden-section search on the two
    neighbouring cells. Among maxima whose values agree to ``TIE_RTOL`` the
    smallest rate wins.
    """
    R = market.R
    x = _feasible_grid(market, grid)
    s = welfare_values(policy, R, x)
    s[0] = 0.0

    def f(t):
        return float(welfare_values(policy, R, t)) if t > 0.0 else 0.0

    maxima = []
    last = x.size - 1
    if s[0] >= s[1]:
        maxima.append((0.0, 0.0))
    inner = np.flatnonzero((s[1:-1] >= s[:-2]) & (s[1:-1] > s[2:])) + 1
    for i in inner:
        rate, val = golden_section_max(f, float(x[i - 1]), float(x[i + 1]), xtol=REFINE_XTOL)
        if val < s[i]:
            rate, val = float(x[i]), float(s[i])
        maxima.append((rate, val))
    if market.Lambda < 1.0 and s[last] > s[last - 1]:
        maxima.append((float(x[last]), float(s[last])))

    best = max(v for _, v in maxima)
    lam_star, value = min((r, v) for r, v in maxima if v >= best - TIE_RTOL * max(1.0, abs(best)))
    boundary = lam_star == 0.0 or (market.Lambda < 1.0 and lam_star == x[last])
    resid = 0.0 if boundary else foc_residual(policy, market, lam_star)
    return WelfareOptimum(lambda_star=lam_star, value=value, foc_residual=resid,
                          local_maxima=tuple(maxima), bimodal=len(maxima) >= 2, boundary=boundary)


def foc_residual(policy: ServicePolicy, market: Market, lam: float, h: float = DIFF_STEP) -> float:
    """``|R - W - lambda W'|`` with a central-difference W'."""
    if not (h <= lam and lam + h < 1.0):
        raise DomainError(f"lambda={lam!r} too close to the edge of (0, 1)")
    w = float(w_values(policy, lam))
    dw = float(w_values(policy, lam + h) - w_values(policy, lam - h)) / (2.0 * h)
    return abs(market.R - w - lam * dw)


def _relation(lam_star, lo, hi, tol=ORDER_TOL):
    if lam_star < lo - tol:
        return "below"
    if lam_star > hi + tol:
        return "above"
    return "between"


def t1_designated_equilibrium(mu_l: float, R: float) -> float:
    """The equilibrium bounding every social optimum from above when T = 1, R >= 1.

    This is the largest stable positive equilibrium, the tangency root when
    that is the only positive one, and zero when no positive equilibrium exists.
    """
    case = t1_case(mu_l, R)
    roots = t1_roots(mu_l, R)
    if case in ("v", "vi", "tie"):
        return roots["lambda_1"]
    if case == "iv":
        return roots["lambda_0"]
    return 0.0


def compare_optimum_to_equilibria(policy: ServicePolicy, market: Market) -> OptimumComparison:
    opt = optimize_welfare(policy, market)
    eqs = find_equilibria(policy, market)
    rel = _relation(opt.lambda_star, eqs.min_rate, eqs.max_rate)
    bound = holds = None
    if policy.T == 1 and market.R >= 1.0:
        bound = min(t1_designated_equilibrium(policy.mu_l, market.R), market.rate_cap)
        holds = opt.lambda_star <= bound + ORDER_TOL
    return OptimumComparison(opt.lambda_star, eqs.min_rate, eqs.max_rate, rel, bound, holds)


def t1_welfare_properties(mu_l: float, market: Market, n: int = 1000, h: float = 1e-4,
                          top: float = 0.99) -> T1WelfareReport:
    """Grid certificate of the concavity and tail behaviour of S when T = 1.

    ``concave_on_grid`` reports whether the second difference of S is negative
    at every grid point of ``[0, top]``, regardless of which side of 1/2 mu_l
    falls on. When ``1 - R/4 <= mu_l < 1/2`` the tail beyond the tangency root
    or the larger root is also checked for being decreasing and concave.
    """
    R = market.R

    def s(t):
        return t * (R - t1_waiting_time(mu_l, t))

    # one-sided at 0: S is defined only for lambda >= 0
    xs = np.linspace(0.0, top, n)
    d2 = [second_difference(s, max(t, h), h) for t in xs]
    concave = all(v < 0.0 for v in d2)

    edge = 1.0 - R / 4.0
    tail_case = tail_start = tail_ok = None
    if mu_l < 0.5 and mu_l >= edge:
        roots = t1_roots(mu_l, R)
        tail_case = "lambda_0" if mu_l == edge else "lambda_1"
        tail_start = roots["lambda_0"] if mu_l == edge else roots["lambda_1"]
        ts = np.linspace(tail_start, top, n)[1:]
        dec = all(s(b) < s(a) for a, b in zip(ts, ts[1:]))
        conc = all(second_difference(s, t, min(h, 0.5 * (t - tail_start))) < 0.0 for t in ts[:-1])
        tail_ok = dec and conc
    return T1WelfareReport(mu_l, R, concave, tail_case, tail_start, tail_ok)
