"""Acceptance criteria 1-16. Each test records one pass/fail line printed at the end of the run."""

import math
import time

import numpy as np

from lpbounds.bounds import asymptotic_factor, packing_baseline, theta_star
from lpbounds.certificate import (
    codes_setup,
    h_codes_m1,
    h_packing,
    m2_admissible_kappa,
    optimize_delta,
    packing_setup,
    psd_check,
    verify_codes,
    verify_packing,
)
from lpbounds.jacobi import JacobiParam, diffroots_bound, krasikov_violations, largest_root, supnorm_bound, weighted_square_log
from lpbounds.levenshtein import lev_log, lev_polynomial, linearization_error, m_lev_exact, quadrature_ratio
from lpbounds.stiefel import density_validation, mc_h, mc_packing_h

TS = theta_star()
TH60 = math.radians(60)
TH75 = math.radians(75)


def _lev_callable(L):
    return lambda x: (lambda s, l: s * np.exp(l))(*lev_log(L, x))


def test_c01_theta_star(record):
    t0 = time.time()
    deg = math.degrees(theta_star.__wrapped__())
    dt = time.time() - t0
    ok = 62.996 <= deg <= 62.998 and dt < 1
    record(1, ok, f"theta* = {deg:.6f} deg ({dt:.3f}s)")
    assert ok


def test_c02_kl_packing_exponent(record):
    t0 = time.time()
    val = packing_baseline(2048, TS).log2() / 2048
    dt = time.time() - t0
    ok = -0.604 <= val <= -0.594 and dt < 10
    record(2, ok, f"(1/n) log2 baseline at n=2048 = {val:.5f}, target [-0.604, -0.594] ({dt:.2f}s)")
    assert ok


def test_c03_mlev_identity(record):
    t0 = time.time()
    worst = 0.0
    for n, deg in [(16, 60), (24, 60), (24, 63), (48, 75)]:
        th = math.radians(deg)
        quad = quadrature_ratio(lev_polynomial(n, th))
        worst = max(worst, abs(math.expm1(quad.log_mag - math.log(m_lev_exact(n, th)))))
    dt = time.time() - t0
    ok = worst <= 1e-8 and dt < 10
    record(3, ok, f"max relative error {worst:.2e} ({dt:.2f}s)")
    assert ok


def test_c04_mlev_right_angle(record):
    t0 = time.time()
    bad = [n for n in range(4, 65) if m_lev_exact(n, math.pi / 2) != 2 * n]
    dt = time.time() - t0
    ok = not bad and dt < 1
    record(4, ok, f"mismatches {bad} ({dt:.3f}s)")
    assert ok


def test_c05_krasikov_envelope(record):
    t0 = time.time()
    total = 0
    for d in (10, 40, 100, 400):
        bad, _ = krasikov_violations(d, 1.5 * d, points=1000)
        total += bad
    dt = time.time() - t0
    ok = total == 0 and dt < 30
    record(5, ok, f"{total} violations ({dt:.2f}s)")
    assert ok


def test_c06_root_bound(record):
    t0 = time.time()
    bad = []
    for a in (1.0, 10.0, 100.0, 300.0):
        for d in range(5, 201):
            if largest_root(JacobiParam(a, a, d)) > diffroots_bound(d, a):
                bad.append((d, a))
    dt = time.time() - t0
    ok = not bad and dt < 60
    record(6, ok, f"{len(bad)} violations over 784 pairs ({dt:.2f}s)")
    assert ok


def test_c07_supnorm(record):
    t0 = time.time()
    rng = np.random.default_rng(2024)
    x = np.linspace(-1, 1, 10002)[1:-1]
    bad = 0
    worst = -math.inf
    for _ in range(20):
        d = int(rng.integers(6, 300))
        a = float(rng.uniform(1.0, 400.0))
        p = JacobiParam(a, a, d)
        gap = float(np.max(weighted_square_log(p, x))) - supnorm_bound(p).log_mag
        worst = max(worst, gap)
        bad += gap > 0
    dt = time.time() - t0
    ok = bad == 0 and dt < 30
    record(7, ok, f"{bad} violations, max log(sup/bound) = {worst:.3f} ({dt:.2f}s)")
    assert ok


def test_c08_factors(record):
    t0 = time.time()
    got = [asymptotic_factor(m, TS).geometric_average for m in (1, 2, 4)]
    dt = time.time() - t0
    ok = all(abs(g - e) <= 5e-4 for g, e in zip(got, (0.2304, 0.2944, 0.4267))) and dt < 1
    record(8, ok, "m=1,2,4: " + ", ".join(f"{g:.5f}" for g in got))
    assert ok


def test_c09_packing_threshold(record):
    t0 = time.time()
    straddle = []
    for n in (300, 600, 1200):
        su = packing_setup(n, TH75)
        lo = verify_packing(n, TH75, 0.8 * su.ell / n, setup=su).feasible
        hi = verify_packing(n, TH75, 1.25 * su.ell / n, setup=su).feasible
        straddle.append(lo and not hi)
    res = optimize_delta("packing", 1200, TH75, iters=10)
    dt = time.time() - t0
    scaled, fac = res["scaled"], res["improvement_factor"] * math.e
    ok = all(straddle) and 0.85 <= scaled <= 1.05 and abs(fac - 1) <= 0.15 and dt < 600
    record(9, ok, f"straddle {straddle}, n*delta/r = {scaled:.4f}, factor*e = {fac:.4f} ({dt:.0f}s)")
    assert ok


def test_c10_codes_threshold(record):
    t0 = time.time()
    straddle = []
    for n in (300, 600, 1200):
        su = codes_setup(n, TH60, TS, 1)
        r = su.geo.r
        unit = (1 - r * r) / r / n
        lo = verify_codes(n, TH60, TS, 0.8 * unit, setup=su).feasible
        hi = verify_codes(n, TH60, TS, 1.25 * unit, setup=su).feasible
        straddle.append(lo and not hi)
    res = optimize_delta("codes", 1200, TH60, TS, iters=10)
    dt = time.time() - t0
    fac = res["improvement_factor"] * math.e
    ok = all(straddle) and abs(fac - 1) <= 0.15 and dt < 600
    record(10, ok, f"straddle {straddle}, gamma scale = {res['scaled']:.4f}, factor*e = {fac:.4f} ({dt:.0f}s)")
    assert ok


def test_c11_m2_family(record):
    t0 = time.time()
    n = 400
    su = codes_setup(n, TH60, TS, 2)
    r, sp = su.geo.r, su.lev.s_prime
    gamma = (1 - r * r) / (2 * r)
    kappa = m2_admissible_kappa(r, sp, gamma)
    lo = verify_codes(n, TH60, TS, gamma / n, 2, 0.9 * kappa / math.sqrt(n), setup=su)
    hi = verify_codes(n, TH60, TS, gamma / n, 2, 1.25 * kappa / math.sqrt(n), setup=su)
    dt = time.time() - t0
    ok = lo.feasible and not hi.feasible and dt < 600
    record(11, ok, f"0.9 kappa feasible={lo.feasible} (max ratio {lo.max_ratio:.3f}), 1.25 kappa feasible={hi.feasible} (max ratio {hi.max_ratio:.3f}) ({dt:.0f}s)")
    assert ok


def test_c12_density(record):
    t0 = time.time()
    rep = density_validation(10, 2, 0.3, 20, 1_000_000, seed=0)
    dt = time.time() - t0
    ok = rep["p_value"] > 1e-3 and rep["outside_support"] == 0 and dt < 120
    record(12, ok, f"chi2 = {rep['chi2']:.1f}, dof = {rep['dof']}, p = {rep['p_value']:.3f} ({dt:.1f}s)")
    assert ok


def test_c13_point_pair_and_cross_estimator(record):
    t0 = time.time()
    n = 16
    su = codes_setup(n, TH60, TS, 1)
    r = su.geo.r
    delta = 0.5 * (1 - r * r) / r / n
    region = su.region(delta)
    g = _lev_callable(su.lev)
    rng = np.random.default_rng(77)
    worst = 0.0
    for t in (0.2, 0.35, 0.45):
        q = h_codes_m1(n, TH60, TS, delta, t, setup=su).to_float()
        a = mc_h(n, 1, t, region, g, 400_000, seed=1)
        x = rng.standard_normal(n)
        x /= np.linalg.norm(x)
        w = rng.standard_normal(n)
        w -= (w @ x) * x
        w /= np.linalg.norm(w)
        b = mc_h(n, 1, t, region, g, 400_000, seed=2, x=x, y=t * x + math.sqrt(1 - t * t) * w)
        worst = max(worst, abs(a["estimate"] - q) / a["std_err"], abs(b["estimate"] - q) / b["std_err"],
                    abs(a["estimate"] - b["estimate"]) / math.hypot(a["std_err"], b["std_err"]))
    dt = time.time() - t0
    ok = worst < 3 and dt < 120
    record(13, ok, f"max deviation {worst:.2f} combined standard errors ({dt:.1f}s)")
    assert ok


def test_c14_packing_weight(record):
    t0 = time.time()
    n = 8
    su = packing_setup(n, TH75)
    q = h_packing(su.spec(0.0), 1.0, su.lev)
    mc = mc_packing_h(n, su.ell, 1.0, _lev_callable(su.lev), 4_000_000, seed=5)
    dev = abs(mc["estimate"] - q.to_float()) / mc["std_err"]
    dt = time.time() - t0
    ok = dev < 3 and q.sign <= 0 and dt < 120
    record(14, ok, f"quadrature {q.to_float():.6g}, Monte Carlo {mc['estimate']:.6g} +- {mc['std_err']:.2g} ({dev:.2f} se) ({dt:.1f}s)")
    assert ok


def test_c15_psd(record):
    t0 = time.time()
    mins = []
    for n in (16, 32):
        # half of the finite-n threshold found by the optimizer
        delta = 0.5 * optimize_delta("codes", n, TH60, TS, iters=8)["delta_star"]
        assert delta > 0 and verify_codes(n, TH60, TS, delta).feasible
        mins.append(psd_check(n, TH60, TS, delta))
    dt = time.time() - t0
    ok = min(mins) >= -1e-6 and dt < 120
    record(15, ok, f"min normalized coefficient n=16: {mins[0]:.3e}, n=32: {mins[1]:.3e} ({dt:.1f}s)")
    assert ok


def test_c16_linearization(record):
    t0 = time.time()
    errs = {}
    for n in (200, 400, 800, 1600):
        left, right = linearization_error(lev_polynomial(n, TH60), n ** -0.9)
        errs[n] = max(left, right)
    dt = time.time() - t0
    seq = [errs[n] for n in sorted(errs)]
    decreasing = all(b < a for a, b in zip(seq, seq[1:]))
    ok = errs[400] <= 0.05 and decreasing and dt < 30
    record(16, ok, "relative error " + ", ".join(f"n={n}: {e:.4f}" for n, e in errs.items()) + f", decreasing={decreasing}")
    assert ok
