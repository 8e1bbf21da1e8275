"""Symmetric join/balk equilibria of the unobservable threshold queue.

Interior equilibria solve ``W(lambda) = R``. Multiplying through by the
positive factor ``(1 - lambda) d(lambda)`` turns this into the polynomial
equation ``H(lambda) = R (1 - lambda) d(lambda) - g(lambda) = 0`` of degree
``T + 1``; ``H`` is positive exactly where joining pays (``W < R``).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial import polynomial as P

from .core import Market, ServicePolicy, w_values, waiting_time
from .errors import QueueModelError
from .numerics import DIFF_STEP, bisect, count_sign_variations

SCAN_POINTS = 20001
DEFAULT_TOL = 1e-10
MARGINAL_SLOPE = 1e-5
ZERO_REL_EPS = 1e-12


class Kind(str, enum.Enum):
    BOUNDARY_ZERO = "boundary_zero"
    BOUNDARY_LAMBDA = "boundary_Lambda"
    INTERIOR = "interior"


class Stability(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"


@dataclass(frozen=True)
class EquilibriumPolynomial:
    coefficients: np.ndarray  # ascending powers
    T: int
    mu_l: float
    R: float

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    def __call__(self, lam):
        return P.polyval(lam, self.coefficients)

    def derivative(self, order: int = 1) -> np.ndarray:
        return P.polyder(self.coefficients, order)


@dataclass(frozen=True)
class SignVariationReport:
    point: float
    derivative_values: tuple
    variations: int


@dataclass(frozen=True)
class EquilibriumPoint:
    rate: float
    kind: Kind
    stability: Stability | None = None
    residual: float = 0.0
    multiplicity: int = 1


@dataclass(frozen=True)
class EquilibriumSet:
    points: tuple = ()
    case: str | None = None

    @property
    def count_interior(self) -> int:
        return sum(1 for p in self.points if p.kind is Kind.INTERIOR)

    @property
    def interior(self) -> tuple:
        return tuple(p for p in self.points if p.kind is Kind.INTERIOR)

    @property
    def rates(self) -> list:
        return [p.rate for p in self.points]

    @property
    def min_rate(self) -> float:
        return self.points[0].rate

    @property
    def max_rate(self) -> float:
        return self.points[-1].rate

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


def build_equilibrium_polynomial(policy: ServicePolicy, R: float) -> EquilibriumPolynomial:
    """Coefficients of ``H = R (1 - lambda) d - g``; the leading one is ``-R (1 - mu_l)``."""
    d = policy.d_coefficients
    g = policy.g_coefficients
    h = R * P.polymul([1.0, -1.0], d)
    h[: g.size] -= g
    return EquilibriumPolynomial(coefficients=h, T=policy.T, mu_l=policy.mu_l, R=float(R))


def budan_sign_variations(poly: EquilibriumPolynomial, point: float,
                          rel_eps: float = ZERO_REL_EPS) -> SignVariationReport:
    """Sign variations of ``(H, H', ..., H^(T+1))`` at ``point``.

    Entries smaller than ``rel_eps`` times the absolute-value sum of the terms
    that produce them are treated as zeros and skipped.
    """
    c = np.asarray(poly.coefficients, dtype=float)
    x, ax = float(point), abs(float(point))
    values, scales = [], []
    while c.size:
        values.append(float(P.polyval(x, c)))
        scales.append(float(P.polyval(ax, np.abs(c))))
        c = c[1:] * np.arange(1, c.size)
    v = count_sign_variations(values, scales, rel_eps)
    return SignVariationReport(point=float(point), derivative_values=tuple(values), variations=v)


def _w_slope(policy, lam, h=DIFF_STEP):
    lo, hi = max(lam - h, 0.0), min(lam + h, 1.0 - 1e-15)
    return float((w_values(policy, hi) - w_values(policy, lo)) / (hi - lo))


def classify_stability(policy: ServicePolicy, market: Market, point: EquilibriumPoint,
                       slope_tol: float = MARGINAL_SLOPE) -> EquilibriumPoint:
    """Label an equilibrium by how the delay responds to a small change in rate.

    An interior point is stable when W increases through R (more joiners make
    joining worse), unstable when W decreases, marginal at a tangency.
    """
    if point.kind is Kind.BOUNDARY_LAMBDA:
        return replace(point, stability=Stability.STABLE)
    if point.kind is Kind.BOUNDARY_ZERO:
        w0 = 1.0 / policy.mu_l
        label = Stability.STABLE if w0 > market.R else Stability.MARGINAL
        return replace(point, stability=label)
    slope = _w_slope(policy, point.rate)
    if abs(slope) < slope_tol:
        label = Stability.MARGINAL
    else:
        label = Stability.STABLE if slope > 0 else Stability.UNSTABLE
    return replace(point, stability=label)


def root_tolerance(tol: float, R: float) -> float:
    """Residual bound on ``|W - R|``; relative once R exceeds 1, since W' ~ R**2 near the top root."""
    return tol * max(1.0, R)


def _interior_roots(policy, R, cap, tol, n_scan):
    """Roots of H in (0, cap) as ``(rate, multiplicity)`` pairs, ascending."""
    poly = build_equilibrium_polynomial(policy, R)
    h = poly.coefficients
    dh = P.polyder(h)
    x = np.linspace(0.0, cap, n_scan)
    hx = P.polyval(x, h)

    def hf(t):
        return float(P.polyval(t, h))

    def dhf(t):
        return float(P.polyval(t, dh))

    scaled_tol = root_tolerance(tol, R)

    def close_enough(t):
        return abs(float(w_values(policy, t)) - R) < scaled_tol

    def solve(a, b):
        return bisect(hf, a, b, accept=close_enough)

    sign = np.sign(hx)
    roots = [(float(x[i]), 1) for i in np.flatnonzero(sign[1:-1] == 0.0) + 1]
    for i in np.flatnonzero(sign[:-1] * sign[1:] < 0.0):
        roots.append((solve(float(x[i]), float(x[i + 1])), 1))

    # Same-sign local minima of |H|: refine the extremum of H through a root of H'.
    # A sign flip there means two close roots; a near-touch is a tangency.
    ah = np.abs(hx)
    touch_tol = math.sqrt(scaled_tol)
    mid = slice(1, -1)
    cand = ((ah[mid] <= ah[:-2]) & (ah[mid] <= ah[2:])
            & (sign[mid] != 0.0) & (sign[:-2] == sign[mid]) & (sign[2:] == sign[mid]))
    for i in np.flatnonzero(cand) + 1:
        a, b = float(x[i - 1]), float(x[i + 1])
        if (dhf(a) > 0.0) == (dhf(b) > 0.0):
            continue
        m = bisect(dhf, a, b)
        hm = hf(m)
        if hm != 0.0 and (hm > 0.0) != (sign[i] > 0.0):
            roots.append((solve(a, m), 1))
            roots.append((solve(m, b), 1))
        elif m < 1.0 and abs(float(w_values(policy, m)) - R) < touch_tol:
            roots.append((m, 2))
    roots.sort()
    merged = []
    for r, mult in roots:
        if merged and r - merged[-1][0] < 1e-12:
            merged[-1] = (merged[-1][0], merged[-1][1] + mult)
        else:
            merged.append((r, mult))
    return [(r, mult) for r, mult in merged if 0.0 < r < cap]


def find_equilibria(policy: ServicePolicy, market: Market, tol: float = DEFAULT_TOL,
                    n_scan: int = SCAN_POINTS) -> EquilibriumSet:
    """All symmetric equilibrium arrival rates in ``[0, min(Lambda, 1)]``.

    Zero is an equilibrium when ``W(0) = 1/mu_l >= R``; ``Lambda`` itself when
    ``Lambda < 1`` and ``W(Lambda) < R``. Interior rates are found by scanning
    ``H`` for sign changes and bisecting each bracket until
    ``|W - R| < tol * max(1, R)``;
    double roots are caught by refining same-sign local minima of ``|H|``.
    """
    if not tol > 0.0:
        raise ValueError("tol must be > 0")
    R, cap = market.R, market.rate_cap
    points = []
    if 1.0 / policy.mu_l >= R:
        points.append(EquilibriumPoint(0.0, Kind.BOUNDARY_ZERO))
    for rate, mult in _interior_roots(policy, R, cap, tol, n_scan):
        resid = abs(waiting_time(policy, rate).w - R)
        points.append(EquilibriumPoint(rate, Kind.INTERIOR, residual=resid, multiplicity=mult))
    if market.Lambda < 1.0 and waiting_time(policy, market.Lambda).w < R:
        points.append(EquilibriumPoint(float(market.Lambda), Kind.BOUNDARY_LAMBDA))
    points = [classify_stability(policy, market, p) for p in points]
    return EquilibriumSet(tuple(points))


# --- threshold T = 1: closed form ---------------------------------------------

def t1_roots(mu_l: float, R: float) -> dict:
    """Closed-form roots ``lambda_1, lambda_2`` (None when complex) and ``lambda_0``."""
    lam0 = (1.0 - 2.0 * mu_l) / (2.0 * (1.0 - mu_l))
    disc = R * (R - 4.0 * (1.0 - mu_l))
    if disc < 0.0 or R == 0.0:  # no real roots; R = 0 makes H constant
        return {"lambda_0": lam0, "lambda_1": None, "lambda_2": None}
    sq = math.sqrt(disc)
    den = 2.0 * R * (1.0 - mu_l)
    return {
        "lambda_0": lam0,
        "lambda_1": (R * (1.0 - 2.0 * mu_l) + sq) / den,
        "lambda_2": (R * (1.0 - 2.0 * mu_l) - sq) / den,
    }


def t1_case(mu_l: float, R: float) -> str:
    """Which regime of the T = 1 equilibrium classification applies.

    Returns one of ``"i"`` ... ``"vi"``, or ``"tie"`` for ``R > 2`` with
    ``mu_l == 1/R`` exactly, a boundary the classification leaves out (there
    zero and ``(R - 2)/(R - 1)`` are the equilibria).
    """
    if R < 1.0:
        return "i"
    if mu_l > 1.0 / R:
        return "vi"
    if R <= 2.0:
        return "ii"
    if mu_l == 1.0 / R:
        return "tie"
    edge = 1.0 - R / 4.0
    if mu_l < edge:
        return "iii"
    if mu_l == edge:
        return "iv"
    return "v"


def t1_equilibria(mu_l: float, market: Market) -> EquilibriumSet:
    """Equilibria for threshold 1, from the quadratic's closed-form roots."""
    policy = ServicePolicy(1, mu_l)
    R = market.R
    case = t1_case(mu_l, R)
    roots = t1_roots(mu_l, R)
    interior = []
    if case in ("v", "vi", "tie"):
        if roots["lambda_1"] is None:
            raise QueueModelError(f"negative discriminant in case {case}: internal inconsistency")
        interior.append((roots["lambda_1"], 1))
        if case == "v":
            interior.append((roots["lambda_2"], 1))
    elif case == "iv":
        interior.append((roots["lambda_0"], 2))

    cap = market.rate_cap
    points = []
    if 1.0 / mu_l >= R:
        points.append(EquilibriumPoint(0.0, Kind.BOUNDARY_ZERO))
    for rate, mult in sorted(interior):
        if 0.0 < rate < cap:
            resid = abs(waiting_time(policy, rate).w - R)
            points.append(EquilibriumPoint(rate, Kind.INTERIOR, residual=resid, multiplicity=mult))
    if market.Lambda < 1.0 and waiting_time(policy, market.Lambda).w < R:
        points.append(EquilibriumPoint(float(market.Lambda), Kind.BOUNDARY_LAMBDA))
    points = [classify_stability(policy, market, p) for p in points]
    return EquilibriumSet(tuple(points), case=case)
