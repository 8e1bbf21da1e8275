"""Small one-dimensional numerical routines used across the package."""
from __future__ import annotations

import math
from typing import Callable

from .errors import ConvergenceError

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0  # 1/phi ~ 0.618

DIFF_STEP = 1e-6


def bisect(f: Callable[[float], float], a: float, b: float, *, xtol: float = 0.0,
           accept: Callable[[float], bool] | None = None, max_iter: int = 200) -> float:
    """Root of ``f`` in a sign-change bracket ``[a, b]``.

    Stops when ``accept(mid)`` is true, when the bracket is narrower than
    ``xtol``, or when the bracket has collapsed to adjacent floats (then the
    endpoint with the smaller ``|f|`` is returned). If ``accept`` is given and
    never satisfied, :class:`ConvergenceError` carries the final bracket.
    """
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if (fa > 0.0) == (fb > 0.0):
        raise ValueError(f"no sign change on [{a}, {b}]")
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        fm = f(mid)
        if fm == 0.0 or (accept is not None and accept(mid)):
            return mid
        if (fm > 0.0) == (fa > 0.0):
            a, fa = mid, fm
        else:
            b, fb = mid, fm
        if b - a <= xtol and accept is None:
            break
    best = a if abs(fa) <= abs(fb) else b
    if accept is not None and not accept(best):
        raise ConvergenceError(f"bisection did not meet tolerance on [{a!r}, {b!r}]", best=(a, b))
    return best


def golden_section_max(f: Callable[[float], float], a: float, b: float, *,
                       xtol: float = 1e-10, max_iter: int = 500) -> tuple[float, float]:
    """Maximise a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``.

    The endpoints are kept as candidates, so the result is never worse than
    ``max(f(a), f(b))``.
    """
    lo, hi = a, b
    x1 = hi - INV_PHI * (hi - lo)
    x2 = lo + INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    best_x, best_f = (x1, f1) if f1 >= f2 else (x2, f2)
    it = 0
    while hi - lo > xtol:
        it += 1
        if it > max_iter:
            raise ConvergenceError("golden-section search exhausted its budget", best=best_x)
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - INV_PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + INV_PHI * (hi - lo)
            f2 = f(x2)
        for x, fx in ((x1, f1), (x2, f2)):
            if fx > best_f:
                best_x, best_f = x, fx
    for x in (a, b):
        fx = f(x)
        if fx > best_f:
            best_x, best_f = x, fx
    return best_x, best_f


def central_difference(f: Callable[[float], float], x: float, h: float = DIFF_STEP) -> float:
    return (f(x + h) - f(x - h)) / (2.0 * h)


def second_difference(f: Callable[[float], float], x: float, h: float) -> float:
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)


def count_sign_variations(values, zero_scale=None, rel_eps: float = 1e-12) -> int:
    """Number of sign changes in ``values``, skipping (near-)zero entries.

    An entry counts as zero when ``|v| <= rel_eps * scale`` where ``scale`` is
    the matching entry of ``zero_scale`` (defaults to exact-zero skipping).
    """
    signs = []
    for i, v in enumerate(values):
        scale = 0.0 if zero_scale is None else zero_scale[i]
        if v == 0.0 or abs(v) <= rel_eps * scale:
            continue
        signs.append(v > 0.0)
    return sum(1 for s, t in zip(signs, signs[1:]) if s != t)
