"""End-to-end acceptance checks; each prints one PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from lattice import grid_minimum, lattice_instance
from mdiqkd.baseline import closed_form_yield
from mdiqkd.channel import model_observables, sample_tallies
from mdiqkd.core import ChannelParams, DomainError, IntensityProfile
from mdiqkd.decoy import build_scan_rectangle, e11_upper, expected_rates, true_scan_point, y11_lower_lp
from mdiqkd.lp import VertexEnumerationSolver
from mdiqkd.optimize import OptimizerOptions, optimize_profile
from mdiqkd.pipeline import evaluate, evaluate_baseline
from mdiqkd.scan import rate_formula
from mdiqkd.stats import SecurityBudget, chernoff_interval

from conftest import PROFILE_120, PROFILE_150

TARGET_120_BPS = 43.54
TARGET_150_BPS = 0.06


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'} {title}: {detail}")
        return ok

    return emit


def test_c1_headline_rate_at_120km(report):
    start = time.perf_counter()
    res = evaluate(PROFILE_120, ChannelParams(distance_km=120.0, n_total=1e10, epsilon=1e-10)).result
    elapsed = time.perf_counter() - start
    ratio = res.r_bps / TARGET_120_BPS
    ok = (1 / 3 <= ratio <= 3) and elapsed <= 60
    report(1, "120 km rate within x3 of 43.54 bps", ok, f"r_bps={res.r_bps:.6g} ratio={ratio:.3g} runtime={elapsed:.2f}s")
    assert ok


def test_c2_positive_rate_at_150km_where_baseline_fails(report):
    ch = ChannelParams(distance_km=150.0, n_total=1e10, epsilon=1e-10)
    ds = evaluate(PROFILE_150, ch).result
    base = evaluate_baseline(PROFILE_150, ch)
    ratio = ds.r_bps / TARGET_150_BPS
    ok = ds.r_bps > 0 and (1 / 5 <= ratio <= 5) and base.r_bps == 0.0
    report(2, "150 km double-scan > 0 within x5 of 0.06 bps, baseline = 0", ok,
           f"double-scan r_bps={ds.r_bps:.6g} baseline r_bps={base.r_bps:.6g}")
    assert ok


def test_c3_dominance_over_optimized_sweep(report):
    opts = OptimizerOptions(max_evals=40, restarts=0, grid=(8, 8), refine=False)
    violations, strict_checked, lines = [], 0, []
    for n_total in (1e9, 1e10, 1e11):
        for d in (50.0, 80.0, 110.0, 140.0):
            ch = ChannelParams(distance_km=d, n_total=n_total)
            seed = PROFILE_150 if d > 130 else PROFILE_120
            prof = optimize_profile(ch, seed, opts).profile
            ds = evaluate(prof, ch).result
            base = evaluate_baseline(prof, ch)
            lines.append(f"{d:g}km/N={n_total:.0e}: {ds.r_bps:.4g} vs {base.r_bps:.4g}")
            if ds.r_per_pulse < base.r_per_pulse:
                violations.append(lines[-1])
            if base.r_per_pulse > 0:
                strict_checked += 1
                if not ds.r_per_pulse > base.r_per_pulse:
                    violations.append(lines[-1] + " (not strict)")
    ok = not violations
    report(3, "double-scan >= baseline on optimized sweep", ok,
           f"{len(lines)} points, {strict_checked} with baseline key, violations={violations or 0}; " + "; ".join(lines))
    assert ok


def _random_profiles(n, seed):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        mu, nu, om = np.sort(rng.uniform(0.02, 0.8, 3))[::-1]
        probs = rng.dirichlet(np.full(4, 3.0))
        try:
            out.append(IntensityProfile(float(mu), float(nu), float(om), *map(float, probs[:3])))
        except DomainError:
            continue
    return out


def test_c4_soundness_against_model_truth(report):
    budget = SecurityBudget(1e-10)
    checked = skipped = violations = grid_above = grid_points = 0
    for d in (50.0, 100.0, 150.0):
        ch = ChannelParams(distance_km=d)
        for prof in _random_profiles(20, seed=4000 + int(d)):
            obs = model_observables(prof, ch)
            tallies = sample_tallies(obs, prof, ch)
            rect = build_scan_rectangle(tallies, prof, budget)
            h_true, m_true = true_scan_point(expected_rates(obs), prof)
            if not rect.contains(h_true, m_true):
                skipped += 1
                continue
            checked += 1
            hs = np.linspace(rect.h_low, rect.h_high, 16)
            ms = np.linspace(rect.m_low, rect.m_high, 16)
            H, M = np.meshgrid(hs, ms, indexing="ij")
            y_grid, _ = y11_lower_lp(rect, H, M, prof)
            e_grid = e11_upper(H, M, y_grid, prof)
            y_true_pt, _ = y11_lower_lp(rect, h_true, m_true, prof)
            e_true_pt = e11_upper(h_true, m_true, y_true_pt, prof)
            grid_points += y_grid.size
            grid_above += int(np.sum(y_grid > obs.y11_true))
            q, e = tallies[("mu", "mu")].gain, tallies[("mu", "mu")].qber
            r_grid = rate_formula(y_grid, e_grid, q, e, prof, ch.f_ec)
            r_truth = float(rate_formula(obs.y11_true, obs.e11_true, q, e, prof, ch.f_ec))
            bad = (
                float(y_true_pt) > obs.y11_true
                or (float(y_true_pt) > 0 and float(e_true_pt) < obs.e11_true)
                or float(np.min(y_grid)) > obs.y11_true
                or float(np.max(e_grid)) < obs.e11_true
                or float(np.min(r_grid)) > r_truth
            )
            violations += int(bad)
    ok = violations == 0 and checked >= 45
    report(4, "bounds sound at the true (H, M) and over the scanned grid", ok,
           f"{checked} configurations checked, {skipped} without the true point in the rectangle, "
           f"violations={violations}; {grid_above}/{grid_points} individual grid points have a yield "
           f"bound above the model value (points away from the true H)")
    assert ok


def test_c5_vertex_enumeration_matches_grid_oracle(report):
    rng = np.random.default_rng(505)
    solver = VertexEnumerationSolver()
    worst = 0.0
    for _ in range(100):
        lp = lattice_instance(rng)
        worst = max(worst, abs(float(solver.solve(lp).value) - grid_minimum(lp)))
    ok = worst <= 1e-9
    report(5, "LP minimum equals brute-force 5^7 grid minimum", ok, f"100 instances, max |diff|={worst:.3g}")
    assert ok


def test_c6_chernoff_coverage(report):
    rng = np.random.default_rng(606)
    n, p = 10**6, 1e-3
    budget = SecurityBudget(1e-2)
    counts = rng.binomial(n, p, size=10**4)
    inside = sum(1 for k in counts if (lambda iv: iv.lower <= p <= iv.upper)(chernoff_interval(k / n, n, budget)))
    frac = inside / counts.size
    ok = frac >= 0.99
    report(6, "Chernoff interval coverage >= 99%", ok, f"coverage={frac:.4f}")
    assert ok


def test_c7_asymptotic_convergence(report):
    ch = ChannelParams(distance_km=120.0, n_total=1e16)
    ev = evaluate(PROFILE_120, ch)
    ds = ev.result.r_per_pulse
    base = evaluate_baseline(PROFILE_120, ch).r_per_pulse
    rel = abs(ds - base) / ds if ds > 0 else math.inf
    exact = closed_form_yield(expected_rates(ev.observables), PROFILE_120)
    dy = abs(ev.result.bounds.y11_zz_lower - exact)
    ok = rel <= 0.01 and dy <= 1e-12
    report(7, "N=1e16: rates within 1%, yield bound equals exact closed form within 1e-12", ok,
           f"rate rel diff={rel:.3g}, |y11_lower - exact|={dy:.3g} (y11_lower={ev.result.bounds.y11_zz_lower:.10g}, exact={exact:.10g})")
    assert ok


def test_c8_grid_convergence(report):
    ch = ChannelParams(distance_km=120.0)
    r16 = evaluate(PROFILE_120, ch, grid=(16, 16)).result.r_per_pulse
    r64 = evaluate(PROFILE_120, ch, grid=(64, 64)).result.r_per_pulse
    scale = max(abs(r16), abs(r64))
    rel = abs(r16 - r64) / scale if scale > 0 else 0.0
    ok = rel < 0.02
    note = " (both zero at this point)" if scale == 0 else ""
    report(8, "16x16 vs 64x64 scan differ < 2%", ok, f"r16={r16:.6g} r64={r64:.6g} rel={rel:.3g}{note}")
    assert ok
