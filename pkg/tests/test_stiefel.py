import math

import numpy as np
import pytest
from scipy.special import eval_jacobi

from lpbounds.bounds import theta_star
from lpbounds.certificate import CapAnnulusRegion, codes_setup, h_codes_general
from lpbounds.jacobi import ParameterDomainError
from lpbounds.levenshtein import lev_log
from lpbounds.stiefel import (
    DegenerateInputError,
    _pair,
    conditional_density_bins,
    density_validation,
    first_coordinate_samples,
    frame_kernel_matrix,
    jacobi_measure_chi2,
    mc_h,
    partial_projections,
    project_coords,
    sample_frame,
    sample_frames,
    two_sample_invariance,
)


def _unit(rng, n):
    x = rng.standard_normal(n)
    return x / np.linalg.norm(x)


def test_frame_orthonormal():
    rng = np.random.default_rng(0)
    for n, m in [(3, 3), (10, 2), (500, 20)]:
        f = sample_frame(n, m, rng)
        assert np.max(np.abs(f.gram() - np.eye(m))) < 1e-12


def test_frame_deterministic():
    a = sample_frame(12, 3, np.random.default_rng(42)).vectors
    b = sample_frame(12, 3, np.random.default_rng(42)).vectors
    assert np.array_equal(a, b)


def test_frame_domain():
    with pytest.raises(ParameterDomainError):
        sample_frame(3, 4, np.random.default_rng(0))


def test_first_coordinate_law():
    x = first_coordinate_samples(10, 1_000_000, np.random.default_rng(7))
    assert jacobi_measure_chi2(x, 10)["p_value"] > 1e-3


def test_first_coordinate_law_detects_wrong_dimension():
    x = first_coordinate_samples(12, 1_000_000, np.random.default_rng(7))
    assert jacobi_measure_chi2(x, 10)["p_value"] < 1e-6


def test_rotation_invariance():
    assert two_sample_invariance(10, 300_000, seed=3)["p_value"] > 1e-3


def test_projection_two_routes():
    rng = np.random.default_rng(11)
    for _ in range(20):
        f = sample_frame(8, 3, rng)
        ds = project_coords(_unit(rng, 8), _unit(rng, 8), f)
        assert -1 <= ds.t_proj <= 1
        lhs = ds.t_proj * math.sqrt((1 - ds.u @ ds.u) * (1 - ds.v @ ds.v))
        assert lhs == pytest.approx(ds.t - ds.u @ ds.v, abs=1e-12)


def test_projection_chain_identity():
    rng = np.random.default_rng(12)
    f = sample_frame(9, 4, rng)
    for vec, closed in partial_projections(_unit(rng, 9), _unit(rng, 9), f):
        assert vec == pytest.approx(closed, abs=1e-10)


def test_projection_edges():
    rng = np.random.default_rng(13)
    x, y = _unit(rng, 6), _unit(rng, 6)
    assert project_coords(x, y, None).t_proj == pytest.approx(x @ y)
    f = sample_frame(6, 2, rng)
    ds = project_coords(x, x, f)
    assert ds.t_proj == pytest.approx(1.0, abs=1e-12)
    assert np.array_equal(ds.u, ds.v)
    with pytest.raises(DegenerateInputError):
        project_coords(f.vectors[0], y, f)


def test_mc_full_region_is_one():
    region = CapAnnulusRegion(2, 0.0, 1.0, math.pi)
    res = mc_h(10, 2, 0.3, region, lambda x: np.ones_like(x), 20000)
    assert res["estimate"] == 1.0 and res["std_err"] == 0.0


def test_mc_point_pair_invariance():
    n, m, t = 10, 2, 0.4
    region = CapAnnulusRegion(m, 0.2, 0.8, 1.0)
    g = lambda x: eval_jacobi(3, 2.5, 2.5, x) + 0.5
    rng = np.random.default_rng(5)
    x2 = _unit(rng, n)
    w = _unit(rng, n)
    w -= (w @ x2) * x2
    w /= np.linalg.norm(w)
    y2 = t * x2 + math.sqrt(1 - t * t) * w
    a = mc_h(n, m, t, region, g, 400_000, seed=1)
    b = mc_h(n, m, t, region, g, 400_000, seed=2, x=x2, y=y2)
    assert abs(a["estimate"] - b["estimate"]) < 3 * math.hypot(a["std_err"], b["std_err"])


def test_mc_matches_importance_sampling_m2():
    n, ts = 12, theta_star()
    su = codes_setup(n, math.pi / 3, ts, 2)
    r = su.geo.r
    region = su.region(0.3 * (1 - r * r) / r / n, 0.6)
    L = su.lev
    g = lambda x: (lambda s, l: s * np.exp(l))(*lev_log(L, x))
    for t in (0.2, 0.45):
        a = mc_h(n, 2, t, region, g, 400_000, seed=4)
        b = h_codes_general(n, math.pi / 3, ts, region, t, 200_000, seed=4, setup=su)
        assert abs(a["estimate"] - b["estimate"].to_float()) < 3 * math.hypot(a["std_err"], b["std_err"])


def test_density_support_and_t_one():
    frames = sample_frames(10, 2, 20000, np.random.default_rng(9))
    x, _ = _pair(10, 1.0)
    u = frames @ x
    v = frames @ x
    assert np.max(np.abs(u - v)) <= 1e-12


def test_density_bins_normalized():
    p = conditional_density_bins(10, 2, 0.3, np.linspace(0, 1, 6), np.linspace(-1, 1, 6), fine=4)
    assert p.sum() == pytest.approx(1.0)
    assert np.all(p >= 0)


def test_density_validation_small():
    rep = density_validation(10, 2, 0.3, 10, 200_000, seed=1)
    assert rep["outside_support"] == 0
    assert rep["p_value"] > 1e-3


def test_density_validation_domain():
    with pytest.raises(ParameterDomainError):
        density_validation(5, 2, 0.3, 10, 1000)
    with pytest.raises(ParameterDomainError):
        density_validation(10, 2, 1.0, 10, 1000)


def test_fixed_frame_kernel_is_psd():
    n, m = 10, 2
    rng = np.random.default_rng(21)
    f = sample_frame(n, m, rng)
    pts = rng.standard_normal((32, n))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    region = CapAnnulusRegion(m, 0.0, 1.0, math.pi)
    a = (n - m - 3) / 2
    for k in (2, 5):
        K = frame_kernel_matrix(pts, f, region, lambda x: eval_jacobi(k, a, a, x))
        assert np.linalg.eigvalsh(K).min() >= -1e-8
