import math

import numpy as np
import pytest

from lpbounds.bounds import theta_star
from lpbounds.certificate import (
    CapAnnulusRegion,
    PackingKernelSpec,
    codes_h_at_one,
    codes_h_zero,
    codes_setup,
    h_codes_general,
    h_codes_m1,
    h_codes_m2,
    h_packing,
    optimize_delta,
    packing_setup,
    psd_check,
    psd_coefficients,
    verify_certificate,
    verify_codes,
    verify_packing,
)
from lpbounds.certificate import _h_codes_m1
from lpbounds.jacobi import ParameterDomainError

TS = theta_star()
TH = math.pi / 3


def _unit(setup):
    r = setup.geo.r
    return (1 - r * r) / r / setup.n


def test_zero_thickening_reproduces_baseline():
    rep = verify_codes(24, math.radians(55), TS)
    assert rep.feasible
    assert rep.bound.log_mag == pytest.approx(rep.baseline.log_mag, abs=1e-12)
    rep = verify_packing(24, math.radians(75))
    assert rep.feasible
    assert rep.improvement_factor == pytest.approx(1.0)
    # snapping to the root keeps M_Lev and lowers the angle, so it only tightens
    assert rep.theta_eff <= rep.theta
    assert rep.bound.log_mag <= rep.extra["classical_baseline"].log_mag


def test_h_tends_to_h_at_one():
    su = codes_setup(16, TH, TS, 1)
    d = 0.5 * _unit(su)
    h1 = codes_h_at_one(su, su.region(d)).to_float()
    # the integrand concentrates on the diagonal as t -> 1, so raise the order
    vals = [_h_codes_m1(su, su.region(d), 1 - e, qs=(16, 24))[0].to_float() for e in (1e-2, 1e-3, 1e-4)]
    errs = [abs(v / h1 - 1) for v in vals]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.01


def test_h0_factorization():
    n = 16
    su = codes_setup(n, TH, TS, 1)
    d = 0.5 * _unit(su)
    c = psd_coefficients(n, TH, TS, d, k_max=0, nodes=48)
    h1 = codes_h_at_one(su, su.region(d))
    h0 = codes_h_zero(su, su.region(d))
    assert c[0] == pytest.approx(math.exp(h0.log_mag - h1.log_mag), rel=1e-4)


def test_quadrature_matches_importance_sampling_m1():
    n = 16
    su = codes_setup(n, TH, TS, 1)
    region = su.region(0.5 * _unit(su))
    for t in (0.2, 0.45):
        q = h_codes_m1(n, TH, TS, 0.5 * _unit(su), t, setup=su).to_float()
        mc = h_codes_general(n, TH, TS, region, t, 200_000, seed=2, setup=su)
        assert abs(q - mc["estimate"].to_float()) < 3 * mc["std_err"]


def test_quadrature_matches_importance_sampling_m2():
    n = 12
    su = codes_setup(n, TH, TS, 2)
    region = su.region(0.3 * _unit(su), 0.6)
    for t in (0.2, 0.45):
        q = h_codes_m2(n, TH, TS, region, t, setup=su).to_float()
        mc = h_codes_general(n, TH, TS, region, t, 200_000, seed=3, setup=su)
        assert abs(q - mc["estimate"].to_float()) < 3 * mc["std_err"]


def test_empty_region_gives_zero():
    su = codes_setup(16, TH, TS, 2)
    region = su.region(0.0, 0.0)
    assert h_codes_m2(16, TH, TS, region, 0.3, setup=su).sign == 0


def test_packing_support():
    su = packing_setup(16, math.radians(75))
    spec = su.spec(0.1)
    assert h_packing(spec, 2 * spec.support_radius, su.lev).sign == 0
    assert h_packing(spec, 2 * spec.support_radius + 0.5, su.lev).sign == 0


def test_packing_scale_covariance():
    n = 8
    su = packing_setup(n, math.radians(75))
    spec = su.spec(0.05)
    big = PackingKernelSpec(n, spec.theta, 2 * spec.r, 2 * spec.delta)
    for T in (0.6, 1.0, 1.3):
        a = h_packing(spec, T, su.lev)
        b = h_packing(big, 2 * T, su.lev)
        assert a.sign == b.sign
        assert b.log_mag - a.log_mag == pytest.approx(n * math.log(2), abs=1e-8)


def test_regions_nest():
    su = codes_setup(40, TH, TS, 2)
    small = su.region(0.01, 0.2)
    big = su.region(0.02, 0.3)
    rng = np.random.default_rng(0)
    u = rng.uniform(-1, 1, (20000, 2))
    u = u[np.linalg.norm(u, axis=1) <= 1]
    assert np.all(big.contains(u)[small.contains(u)])
    with pytest.raises(ParameterDomainError):
        CapAnnulusRegion(2, 0.5, 0.4)


def test_small_dimension_straddle():
    n = 80
    su = codes_setup(n, TH, TS, 1)
    u = _unit(su) * n
    assert verify_codes(n, TH, TS, 0.8 * u / n, setup=su).feasible
    rep = verify_codes(n, TH, TS, 1.25 * u / n, setup=su)
    assert not rep.feasible
    assert rep.violating_point is not None and rep.max_ratio > 0


def test_packing_optimizer_small():
    res = optimize_delta("packing", 200, math.radians(75), iters=8)
    assert 0.8 < res["scaled"] < 1.1
    assert res["report"].feasible
    assert res["improvement_factor"] == pytest.approx((1 + res["delta_star"] / res["report"].extra["ell"]) ** -200, rel=1e-9)


def test_dispatch():
    rep = verify_certificate("packing", n=24, theta=math.radians(75))
    assert rep.kind == "packing"
    with pytest.raises(ParameterDomainError):
        verify_certificate("lattice", n=24)


def test_psd_stricter_normalization():
    d = 0.5 * _unit(codes_setup(16, TH, TS, 1))
    assert psd_check(16, TH, TS, d, k_max=8, stricter=True) >= -1e-6


def test_gram_matrix_psd():
    n = 12
    th = math.radians(55)
    su = codes_setup(n, th, TS, 1)
    d = 0.5 * _unit(su)
    assert verify_codes(n, th, TS, d, setup=su).feasible
    rng = np.random.default_rng(0)
    P = rng.standard_normal((64, n))
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    G = np.clip(P @ P.T, -1, 1)
    iu = np.triu_indices(64, 1)
    vals = np.array([h_codes_m1(n, th, TS, d, float(t), setup=su).to_float() for t in G[iu]])
    h1 = codes_h_at_one(su, su.region(d)).to_float()
    K = np.full((64, 64), h1)
    K[iu] = vals
    K.T[iu] = vals
    assert np.linalg.eigvalsh(K).min() >= -1e-6 * h1

