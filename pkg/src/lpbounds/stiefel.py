"""Orthonormal frames, projection coordinates and Monte Carlo oracles for H."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import betainc, gammaln

from .jacobi import ParameterDomainError


class DegenerateInputError(ValueError):
    pass


@dataclass(frozen=True)
class Frame:
    n: int
    m: int
    vectors: np.ndarray  # shape (m, n)

    def gram(self) -> np.ndarray:
        return self.vectors @ self.vectors.T


@dataclass(frozen=True)
class DensitySample:
    u: np.ndarray
    v: np.ndarray
    t: float
    t_proj: float


def _mgs(G: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt with one reorthogonalization pass.

    G has shape (..., n, m); returns orthonormal columns of the same shape.
    """
    Q = np.array(G, dtype=float, copy=True)
    m = Q.shape[-1]
    for j in range(m):
        v = Q[..., :, j]
        for _ in range(2):
            for i in range(j):
                qi = Q[..., :, i]
                v = v - np.sum(qi * v, axis=-1, keepdims=True) * qi
        Q[..., :, j] = v / np.linalg.norm(v, axis=-1, keepdims=True)
    return Q


def sample_frame(n: int, m: int, rng) -> Frame:
    """Frame from the invariant measure on V_m(R^n)."""
    if not 1 <= m <= n:
        raise ParameterDomainError(f"need 1 <= m <= n, got m={m}, n={n}")
    Q = _mgs(rng.standard_normal((n, m)))
    return Frame(n, m, Q.T.copy())


def sample_frames(n: int, m: int, count: int, rng) -> np.ndarray:
    """Batch of frames, shape (count, m, n)."""
    if not 1 <= m <= n:
        raise ParameterDomainError(f"need 1 <= m <= n, got m={m}, n={n}")
    Q = _mgs(rng.standard_normal((count, n, m)))
    return np.swapaxes(Q, 1, 2)


def batch_rng(seed: int, batch: int):
    """Independent stream per (seed, batch index)."""
    return np.random.default_rng([seed, batch])


def project_coords(x, y, frame: Frame | None) -> DensitySample:
    """Projection coordinates u, v and the fully projected inner product, two ways."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    t = float(x @ y)
    if frame is None or frame.m == 0:
        return DensitySample(np.zeros(0), np.zeros(0), t, t)
    Z = frame.vectors
    u = Z @ x
    v = Z @ y
    xr = x - Z.T @ u
    yr = y - Z.T @ v
    nx, ny = np.linalg.norm(xr), np.linalg.norm(yr)
    if nx < 1e-12 or ny < 1e-12:
        raise DegenerateInputError("point lies in the span of the frame")
    direct = float(xr @ yr / (nx * ny))
    closed = (t - float(u @ v)) / math.sqrt((1.0 - u @ u) * (1.0 - v @ v))
    if abs(direct - closed) > 1e-10:
        raise AssertionError(f"projected inner products disagree: {direct} vs {closed}")
    return DensitySample(u, v, t, direct)


def partial_projections(x, y, frame: Frame) -> list[tuple[float, float]]:
    """For i = 1..m: (vector result, closed form) of the i-times projected inner product."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    t = float(x @ y)
    out = []
    for i in range(1, frame.m + 1):
        Z = frame.vectors[:i]
        u, v = Z @ x, Z @ y
        xr, yr = x - Z.T @ u, y - Z.T @ v
        vec = float(xr @ yr / (np.linalg.norm(xr) * np.linalg.norm(yr)))
        closed = (t - float(u @ v)) / math.sqrt((1.0 - u @ u) * (1.0 - v @ v))
        out.append((vec, closed))
    return out


def _pair(n: int, t: float) -> tuple[np.ndarray, np.ndarray]:
    x = np.zeros(n)
    y = np.zeros(n)
    x[0] = 1.0
    y[0] = t
    y[1] = math.sqrt(max(1.0 - t * t, 0.0))
    return x, y


def _coords(frames: np.ndarray, x: np.ndarray, y: np.ndarray):
    u = frames @ x
    v = frames @ y
    nu = np.sum(u * u, axis=1)
    nv = np.sum(v * v, axis=1)
    t = float(x @ y)
    with np.errstate(invalid="ignore", divide="ignore"):
        xp = (t - np.sum(u * v, axis=1)) / np.sqrt((1.0 - nu) * (1.0 - nv))
    return u, v, np.clip(xp, -1.0, 1.0)


def mc_h(n: int, m: int, t: float, region, g, sample_count: int, rng=None, seed: int = 0, x=None, y=None, batch: int = 20000) -> dict:
    """Direct frame average of F(u) F(v) g(projected inner product)."""
    if x is None or y is None:
        x, y = _pair(n, t)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    total = 0.0
    total_sq = 0.0
    done = 0
    b = 0
    while done < sample_count:
        k = min(batch, sample_count - done)
        gen = rng if rng is not None else batch_rng(seed, b)
        frames = sample_frames(n, m, k, gen)
        u, v, xp = _coords(frames, x, y)
        vals = region.contains(u) * region.contains(v) * np.asarray(g(xp), dtype=float)
        total += float(np.sum(vals))
        total_sq += float(np.sum(vals * vals))
        done += k
        b += 1
    mean = total / done
    var = max(total_sq / done - mean * mean, 0.0) * done / (done - 1)
    return {"estimate": mean, "std_err": math.sqrt(var / done), "samples": done, "seed": seed}


def first_coordinate_samples(n: int, count: int, rng, rotation: np.ndarray | None = None) -> np.ndarray:
    """<z_1, e_1> for sampled frames, optionally after a fixed rotation."""
    out = []
    done = 0
    while done < count:
        k = min(100000, count - done)
        Z = sample_frames(n, 1, k, rng)[:, 0, :]
        if rotation is not None:
            Z = Z @ rotation.T
        out.append(Z[:, 0])
        done += k
    return np.concatenate(out)


def jacobi_measure_chi2(samples: np.ndarray, n: int, bins: int = 50) -> dict:
    """Chi-square of samples in [-1, 1] against the density ~ (1-t^2)^((n-3)/2)."""
    edges = np.linspace(-1.0, 1.0, bins + 1)
    obs, _ = np.histogram(samples, edges)
    a = (n - 1) / 2.0
    cdf = betainc(a, a, (edges + 1.0) / 2.0)
    expected = np.diff(cdf) * samples.size
    obs, expected = _pool(obs, expected)
    stat = float(np.sum((obs - expected) ** 2 / expected))
    dof = obs.size - 1
    return {"chi2": stat, "dof": dof, "p_value": float(stats.chi2.sf(stat, dof))}


def two_sample_invariance(n: int, count: int, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    rot, _ = np.linalg.qr(rng.standard_normal((n, n)))
    a = first_coordinate_samples(n, count, np.random.default_rng([seed, 1]))
    b = first_coordinate_samples(n, count, np.random.default_rng([seed, 2]), rotation=rot)
    res = stats.ks_2samp(a, b)
    return {"statistic": float(res.statistic), "p_value": float(res.pvalue), "seed": seed}


def _pool(obs: np.ndarray, expected: np.ndarray, min_expected: float = 5.0):
    """Merge cells with small expectation into one pooled cell."""
    obs = np.asarray(obs, dtype=float).ravel()
    expected = np.asarray(expected, dtype=float).ravel()
    small = expected < min_expected
    if not np.any(small):
        return obs, expected
    pooled_o = obs[small].sum()
    pooled_e = expected[small].sum()
    obs, expected = obs[~small], expected[~small]
    if pooled_e > 0:
        obs = np.append(obs, pooled_o)
        expected = np.append(expected, pooled_e)
    return obs, expected


def conditional_density_bins(n: int, m: int, t: float, edges_r: np.ndarray, edges_w: np.ndarray, fine: int = 8) -> np.ndarray:
    """Bin probabilities of (|u|, |v|, <u,v>) under the density Delta^((n-m-3)/2).

    Integrates in (rho1, rho2, psi) with psi the angle between u and v, where
    the density picks up rho1^{m-1} rho2^{m-1} sin^{m-2}(psi).
    """
    beta = (n - m - 3) / 2.0
    nr = (len(edges_r) - 1) * fine
    rr = np.linspace(edges_r[0], edges_r[-1], nr + 1)
    rc = 0.5 * (rr[1:] + rr[:-1])
    dr = np.diff(rr)
    npsi = 4 * nr
    pp = np.linspace(0.0, math.pi, npsi + 1)
    pc = 0.5 * (pp[1:] + pp[:-1])
    dp = np.diff(pp)
    ang = np.sin(pc) ** (m - 2) * dp if m > 2 else (np.ones_like(pc) * dp if m == 2 else None)
    if m == 1:
        raise ParameterDomainError("use m >= 2 for the three-statistic density")
    nb_r = len(edges_r) - 1
    nb_w = len(edges_w) - 1
    probs = np.zeros((nb_r, nb_r, nb_w))
    r_bin = np.clip(np.searchsorted(edges_r, rc, side="right") - 1, 0, nb_r - 1)
    cosp = np.cos(pc)
    for i, r1 in enumerate(rc):
        w = r1 * rc[:, None] * cosp[None, :]
        d = (1 - r1 * r1) * (1 - rc[:, None] ** 2) - (t - w) ** 2
        dens = np.where(d > 0, np.maximum(d, 0.0) ** beta, 0.0)
        dens = dens * (r1 ** (m - 1) * dr[i]) * (rc[:, None] ** (m - 1) * dr[:, None]) * ang[None, :]
        w_bin = np.clip(np.searchsorted(edges_w, w, side="right") - 1, 0, nb_w - 1)
        np.add.at(probs, (r_bin[i], np.broadcast_to(r_bin[:, None], w.shape), w_bin), dens)
    return probs / probs.sum()


def density_validation(n: int, m: int, t: float, bins: int, sample_count: int, rng=None, seed: int = 0) -> dict:
    """Chi-square test of sampled (|u|, |v|, <u,v>) against the closed-form density."""
    if n - m < 4:
        raise ParameterDomainError("need n - m >= 4")
    if not -1.0 < t < 1.0:
        raise ParameterDomainError("t must lie in (-1, 1)")
    x, y = _pair(n, t)
    ru, rv, ww = [], [], []
    done, b = 0, 0
    outside = 0
    while done < sample_count:
        k = min(50000, sample_count - done)
        gen = rng if rng is not None else batch_rng(seed, b)
        frames = sample_frames(n, m, k, gen)
        u = frames @ x
        v = frames @ y
        d = (1 - np.sum(u * u, 1)) * (1 - np.sum(v * v, 1)) - (t - np.sum(u * v, 1)) ** 2
        outside += int(np.sum(d < -1e-12))
        ru.append(np.linalg.norm(u, axis=1))
        rv.append(np.linalg.norm(v, axis=1))
        ww.append(np.sum(u * v, axis=1))
        done += k
        b += 1
    ru, rv, ww = map(np.concatenate, (ru, rv, ww))
    edges_r = np.linspace(0.0, 1.0, bins + 1)
    edges_w = np.linspace(-1.0, 1.0, bins + 1)
    obs, _ = np.histogramdd(np.stack([ru, rv, ww], axis=1), bins=(edges_r, edges_r, edges_w))
    expected = conditional_density_bins(n, m, t, edges_r, edges_w) * done
    cells = obs.size
    obs_p, exp_p = _pool(obs, expected)
    stat = float(np.sum((obs_p - exp_p) ** 2 / exp_p))
    dof = obs_p.size - 1
    return {
        "chi2": stat,
        "dof": dof,
        "p_value": float(stats.chi2.sf(stat, dof)),
        "pooled_cells": cells - (obs_p.size - 1),
        "outside_support": outside,
        "samples": done,
        "seed": seed,
    }


def mc_packing_h(n: int, radius: float, T: float, g, sample_count: int, seed: int = 0) -> dict:
    """Direct Monte Carlo over z of the integral of F(|x-z|) F(|y-z|) g(cos angle)."""
    rng = np.random.default_rng(seed)
    x = np.zeros(n)
    y = np.zeros(n)
    y[0] = T
    log_vol = 0.5 * n * math.log(math.pi) - float(gammaln(n / 2.0 + 1.0)) + n * math.log(radius)
    total, total_sq, done = 0.0, 0.0, 0
    while done < sample_count:
        k = min(200000, sample_count - done)
        dirs = rng.standard_normal((k, n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        z = x + dirs * (radius * rng.uniform(size=(k, 1)) ** (1.0 / n))
        a = z - x
        bvec = z - y
        na = np.linalg.norm(a, axis=1)
        nb = np.linalg.norm(bvec, axis=1)
        inside = nb <= radius
        c = np.sum(a * bvec, axis=1) / (na * nb)
        vals = np.where(inside, np.asarray(g(np.clip(c, -1, 1)), dtype=float), 0.0)
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        done += k
    mean = total / done
    var = max(total_sq / done - mean * mean, 0.0) * done / (done - 1)
    scale = math.exp(log_vol)
    return {"estimate": mean * scale, "std_err": math.sqrt(var / done) * scale, "seed": seed}


def frame_kernel_matrix(points: np.ndarray, frame: Frame, region, g) -> np.ndarray:
    """h(x_i, x_j; frame) = F(u_i) F(u_j) g(projected inner product)."""
    Z = frame.vectors
    U = points @ Z.T
    rest = points - U @ Z
    rest /= np.linalg.norm(rest, axis=1, keepdims=True)
    Fv = region.contains(U).astype(float)
    G = np.clip(rest @ rest.T, -1.0, 1.0)
    return np.outer(Fv, Fv) * np.asarray(g(G), dtype=float)
