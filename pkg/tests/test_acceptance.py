"""Acceptance criteria, one PASS/FAIL line each (also collected at the end of the run)."""
import csv
import math
import time

import numpy as np
import pytest

from threshold_queue import Market, ServicePolicy, stationary_distribution, waiting_time
from threshold_queue.cli import main as cli_main
from threshold_queue.equilibrium import (
    Kind,
    Stability,
    budan_sign_variations,
    build_equilibrium_polynomial,
    find_equilibria,
    t1_case,
    t1_equilibria,
)
from threshold_queue.sim import SimConfig, best_response_dynamics, simulate
from threshold_queue.welfare import optimize_welfare, t1_designated_equilibrium

GRID_T = (1, 2, 3, 5, 10, 25)
GRID_MU = tuple(round(0.05 * k, 2) for k in range(1, 20))
GRID_LAM = GRID_MU


def t1_delay_formula(m, lam):
    return 1.0 / ((1.0 - lam) * (m + (1.0 - m) * lam))


def t1_quadratic_roots(m, R):
    sq = math.sqrt(R * (R - 4 * (1 - m)))
    den = 2 * R * (1 - m)
    return (R * (1 - 2 * m) + sq) / den, (R * (1 - 2 * m) - sq) / den


def test_ac1_delay_equals_littles_law(report):
    start = time.perf_counter()
    worst = 0.0
    for T in GRID_T:
        for m in GRID_MU:
            pol = ServicePolicy(T, m)
            for lam in GRID_LAM:
                sd = stationary_distribution(pol, lam, 1e-14)
                worst = max(worst, abs(waiting_time(pol, lam).w - sd.mean_number() / lam))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-10 and elapsed < 5.0
    report("AC1 delay vs Little's law", ok, f"max error {worst:.2e}, {elapsed:.2f} s")
    assert ok


def test_ac2_lower_bound(report):
    bad = sum(waiting_time(ServicePolicy(T, m), lam).w <= 1 / (1 - lam)
              for T in GRID_T for m in GRID_MU for lam in GRID_LAM)
    report("AC2 W > 1/(1-lambda)", bad == 0, f"{bad} violations on the grid")
    assert bad == 0


def test_ac3_threshold_one_closed_form(report):
    worst = max(abs(waiting_time(ServicePolicy(1, m), lam).w - t1_delay_formula(m, lam))
                for m in GRID_MU for lam in GRID_LAM)
    rng = np.random.default_rng(3)
    mismatches = 0
    for m, R in zip(rng.uniform(0.0, 1.0, 1000), rng.uniform(0.0, 30.0, 1000)):
        if m == 0.0:
            continue
        a = t1_equilibria(float(m), Market(float(R)))
        b = find_equilibria(ServicePolicy(1, float(m)), Market(float(R)))
        if len(a) != len(b) or not np.allclose(a.rates, b.rates, atol=1e-8, rtol=0):
            mismatches += 1
    ok = worst < 1e-12 and mismatches == 0
    report("AC3 threshold-one closed form", ok,
           f"delay error {worst:.2e}; {mismatches}/1000 equilibrium-set mismatches")
    assert ok


def test_ac4_reference_instances(report):
    t0 = time.perf_counter()
    a = find_equilibria(ServicePolicy(3, 0.1), Market(9.0))
    t1 = time.perf_counter()
    b = find_equilibria(ServicePolicy(10, 0.2), Market(21.0))
    t2 = time.perf_counter()
    ok_a = (len(a) == 3 and a.points[0].kind is Kind.BOUNDARY_ZERO and a.count_interior == 2)
    ok_b = (len(b) == 3 and b.count_interior == 3 and min(b.rates) > 0
            and b.points[1].stability is Stability.UNSTABLE)
    ok = ok_a and ok_b and t1 - t0 < 1.0 and t2 - t1 < 1.0
    report("AC4 reference instances", ok,
           f"(3,0.1,9) rates {np.round(a.rates, 5).tolist()} in {t1 - t0:.2f} s; "
           f"(10,0.2,21) rates {np.round(b.rates, 5).tolist()} in {t2 - t1:.2f} s")
    assert ok


@pytest.fixture(scope="module")
def random_draws():
    rng = np.random.default_rng(5)
    start = time.perf_counter()
    out = []
    for _ in range(10_000):
        T = int(rng.integers(1, 26))
        m = float(rng.uniform(0.0, 1.0))
        R = float(rng.uniform(1.0, 5.0 / m))
        pol = ServicePolicy(T, m)
        eqs = find_equilibria(pol, Market(R))
        poly = build_equilibrium_polynomial(pol, R)
        v0 = budan_sign_variations(poly, 0.0).variations
        v1 = budan_sign_variations(poly, 1.0).variations
        with_mult = sum(p.multiplicity for p in eqs.interior)
        out.append((T, m, R, eqs.count_interior, with_mult, v0, v1))
    return out, time.perf_counter() - start


def test_ac5a_at_most_three_interior(report, random_draws):
    draws, elapsed = random_draws
    bad = [d for d in draws if d[3] > 3]
    ok = not bad and elapsed < 60.0
    report("AC5a at most 3 interior equilibria", ok, f"{len(bad)} violations, {elapsed:.1f} s for 10^4 draws")
    assert ok


def test_ac5b_at_most_two_below_threshold(report, random_draws):
    draws, _ = random_draws
    bad = [d for d in draws if d[2] < 1 / d[1] and d[3] > 2]
    report("AC5b at most 2 when R < 1/mu_l", not bad, f"{len(bad)} violations")
    assert not bad


def test_ac5c_existence_above_threshold(report, random_draws):
    draws, _ = random_draws
    bad = [d for d in draws if d[2] > 1 / d[1] and d[3] < 1]
    report("AC5c at least 1 when R > 1/mu_l", not bad, f"{len(bad)} violations")
    assert not bad


def test_ac5d_variations_at_zero_at_most_three(report, random_draws):
    draws, _ = random_draws
    bad = [d for d in draws if d[5] > 3]
    example = ""
    if bad:
        T, m, R, n, _, v0, _ = bad[0]
        example = f"; e.g. T={T}, mu_l={m:.4f}, R={R:.3f} has V(0)={v0} with {n} interior root(s)"
    report("AC5d V(0) <= 3", not bad, f"{len(bad)}/{len(draws)} draws exceed 3{example}")
    assert not bad


def test_ac5e_budan_consistency(report, random_draws):
    draws, _ = random_draws
    bad = [d for d in draws if d[4] > d[5] - d[6] or (d[5] - d[6] - d[4]) % 2]
    report("AC5e count <= V(0)-V(1) with matching parity", not bad, f"{len(bad)} violations")
    assert not bad


def test_ac6_threshold_one_case_map(report):
    l1v, l2v = t1_quadratic_roots(0.3, 3.0)
    l1vi, _ = t1_quadratic_roots(0.3, 4.0)
    cases = [  # (case, mu_l, R, predicted set)
        ("i", 0.5, 0.9, [0.0]),
        ("ii", 0.5, 1.5, [0.0]),
        ("iii", 0.15, 3.0, [0.0]),
        ("iv", 0.25, 3.0, [0.0, 1 / 3]),
        ("v", 0.3, 3.0, [0.0, l2v, l1v]),
        ("vi", 0.3, 4.0, [l1vi]),
    ]
    failed = []
    for case, m, R, expected in cases:
        a = t1_equilibria(m, Market(R))
        b = find_equilibria(ServicePolicy(1, m), Market(R))
        good = (t1_case(m, R) == case
                and len(a.rates) == len(expected) and len(b.rates) == len(expected)
                and np.allclose(a.rates, expected, atol=1e-8, rtol=0)
                and np.allclose(b.rates, expected, atol=1e-8, rtol=0))
        if not good:
            failed.append(case)
    report("AC6 threshold-one case map", not failed,
           "all six cases match" if not failed else f"mismatched cases {failed}")
    assert not failed


def _sweep(tmp_path, preset):
    path = tmp_path / f"{preset}.csv"
    assert cli_main(["sweep", "--preset", preset, "--out", str(path)]) == 0
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows


def _col(rows, name):
    return np.array([float(r[name]) for r in rows])


def test_ac7a_welfare_jump(report):
    pol = ServicePolicy(3, 0.1)
    Rs = np.round(np.arange(6.5, 7.5001, 0.01), 2)
    lam = np.array([optimize_welfare(pol, Market(float(R))).lambda_star for R in Rs])
    k = int(np.argmax(np.abs(np.diff(lam))))
    jump = float(lam[k + 1] - lam[k])
    ok = abs(jump) > 0.3
    report("AC7a jump in lambda* for T=3, mu_l=0.1", ok,
           f"lambda* moves {lam[k]:.4f} -> {lam[k + 1]:.4f} between R={Rs[k]} and R={Rs[k + 1]}")
    assert ok


def test_ac7b_threshold_one_optimum_below_equilibrium(report):
    rng = np.random.default_rng(7)
    bad = 0
    for m, R in zip(rng.uniform(0.01, 0.99, 300), rng.uniform(1.0, 30.0, 300)):
        lam_star = optimize_welfare(ServicePolicy(1, float(m)), Market(float(R))).lambda_star
        if lam_star > t1_designated_equilibrium(float(m), float(R)) + 1e-9:
            bad += 1
    report("AC7b T=1 optimum <= equilibrium", bad == 0, f"{bad}/300 violations")
    assert bad == 0


def test_ac7c_welfare_monotone_in_value_and_low_rate(report, tmp_path):
    worst = {}
    for preset in ("fig3", "fig4", "fig5", "fig6"):
        rows = _sweep(tmp_path, preset)
        worst[preset] = float(np.diff(_col(rows, "welfare_star")).min())
    ok = all(v >= 0.0 for v in worst.values())
    report("AC7c S(lambda*) non-decreasing along R and mu_l sweeps", ok,
           ", ".join(f"{k} min step {v:.2e}" for k, v in worst.items()))
    assert ok


def test_ac7d_rates_non_increasing_in_threshold(report, tmp_path):
    rows = _sweep(tmp_path, "fig2")
    worst = {c: float(np.diff(_col(rows, c)).max()) for c in ("eq_min", "eq_max", "lambda_star")}
    ok = all(v <= 1e-9 for v in worst.values())
    report("AC7d rates non-increasing in T", ok,
           ", ".join(f"{k} max step {v:.2e}" for k, v in worst.items()))
    assert ok


SIM_POINTS = [(T, m, lam) for T in (1, 2, 3, 5, 10) for m in (0.2, 0.5) for lam in (0.3, 0.6, 0.8)]


@pytest.mark.slow
def test_ac8_simulation_agreement(report):
    start = time.perf_counter()
    inside = 0
    for seed, (T, m, lam) in enumerate(SIM_POINTS):
        pol = ServicePolicy(T, m)
        est = simulate(SimConfig(pol, lam, 1_000_000, seed=seed))
        inside += abs(est.mean_sojourn - waiting_time(pol, lam).w) <= est.half_width(0.99)
    est = simulate(SimConfig(ServicePolicy(1, 0.25), 1 / 3, 1_000_000, seed=99))
    tangency_ok = abs(est.mean_sojourn - 3.0) <= 3 * est.half_width_95
    elapsed = time.perf_counter() - start
    ok = inside >= 28 and tangency_ok and elapsed < 300.0
    report("AC8 simulation agreement", ok,
           f"{inside}/30 inside 99% CI; T=1 tangency estimate {est.mean_sojourn:.4f} "
           f"+/- {est.half_width_95:.4f}; {elapsed:.0f} s")
    assert ok


def test_ac9_dynamics(report):
    failures = []
    for T, m, R in ((3, 0.1, 9.0), (10, 0.2, 21.0)):
        pol, market = ServicePolicy(T, m), Market(R)
        eqs = find_equilibria(pol, market)
        stable = [p.rate for p in eqs if p.stability is Stability.STABLE]
        for p in eqs:
            if p.stability is Stability.STABLE:
                for start in (p.rate - 0.01, p.rate + 0.01):
                    if 0.0 <= start <= 1.0:
                        end = best_response_dynamics(pol, market, start).converged_to
                        if end is None or abs(end - p.rate) > 1e-4:
                            failures.append((T, p.rate, start, end))
            elif p.stability is Stability.UNSTABLE:
                tr = best_response_dynamics(pol, market, p.rate + 0.01)
                left = max(abs(x - p.rate) for x in tr.iterates) > 0.05
                settled = tr.converged_to is not None and min(abs(tr.converged_to - s) for s in stable) < 1e-4
                if not (left and settled):
                    failures.append((T, p.rate, p.rate + 0.01, tr.converged_to))
    report("AC9 best-response dynamics", not failures,
           "all starts behave as their stability label predicts" if not failures else f"failures {failures}")
    assert not failures


def test_ac10_degenerate_service_limits(report):
    detail, ok = [], True
    for R in (2.0, 4.0, 9.0, 16.0):
        pol, market = ServicePolicy(3, 0.999), Market(R)
        eqs = find_equilibria(pol, market)
        lam_e = eqs.max_rate
        lam_s = optimize_welfare(pol, market).lambda_star
        e_err = abs(lam_e / (1 - 1 / R) - 1)
        s_err = abs(lam_s / (1 - 1 / math.sqrt(R)) - 1)
        ok &= eqs.count_interior == 1 and e_err < 0.01 and s_err < 0.01
        detail.append(f"R={R:g}: {e_err:.1e}/{s_err:.1e}")
    report("AC10 mu_l -> 1 limits", ok, "relative errors eq/opt " + ", ".join(detail))
    assert ok
