"""Levenshtein's optimal polynomials for the Delsarte bound on spherical codes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .jacobi import (
    JacobiParam,
    ParameterDomainError,
    gauss_jacobi,
    jacobi_deriv_log,
    jacobi_log,
    krasikov_q,
    largest_root,
    log_binom,
    log_norm_sq,
)
from .signedlog import SignedLogValue, logsumexp_signed

# Root comparisons at exact ties (e.g. theta' = 90 degrees, root 0) need slack.
ROOT_TIE_TOL = 1e-12
MAX_DEGREE = 20000


class CertificateInvalidError(RuntimeError):
    pass


@lru_cache(maxsize=4096)
def _root(d: int, a: float, b: float) -> float:
    return largest_root(JacobiParam(a, b, d))


def _check_angle(theta: float):
    if not (0.0 < theta <= math.pi / 2 + 1e-15):
        raise ParameterDomainError(f"angle must lie in (0, pi/2], got {theta}")


def select_degree(n_eff: int, theta_prime: float) -> tuple[int, int]:
    """Degree d and case flag for dimension n_eff and minimal angle theta_prime."""
    if n_eff < 2:
        raise ParameterDomainError(f"need n_eff >= 2, got {n_eff}")
    _check_angle(theta_prime)
    alpha = (n_eff - 3) / 2.0
    s = math.cos(theta_prime)
    sin = math.sin(theta_prime)
    rho = (1.0 - sin) / (2.0 * sin)
    d = max(1, int(round(2.0 * rho * alpha)))
    a = alpha + 1.0
    while d > 1 and s <= _root(d - 1, a, a) + ROOT_TIE_TOL:
        d -= 1
    while s > _root(d, a, a) + ROOT_TIE_TOL:
        d += 1
        if d > MAX_DEGREE:
            raise ParameterDomainError("no admissible degree found")
    eps = 1 if s > _root(d, a, alpha) + ROOT_TIE_TOL else 0
    return d, eps


@dataclass(frozen=True)
class LevPolynomial:
    n_eff: int
    alpha: float
    d: int
    case_eps: int
    s_prime: float
    rho: float
    theta_prime: float = math.nan

    @property
    def jacobi_a(self) -> float:
        return self.alpha + 1.0

    @property
    def jacobi_b(self) -> float:
        return self.alpha + self.case_eps

    @property
    def power(self) -> int:
        """Exponent of (1 + x)."""
        return 1 + self.case_eps

    @property
    def degree(self) -> int:
        return 2 * self.d + self.case_eps


def lev_polynomial(n_eff: int, theta_prime: float) -> LevPolynomial:
    d, eps = select_degree(n_eff, theta_prime)
    alpha = (n_eff - 3) / 2.0
    s_prime = _root(d, alpha + 1.0, alpha + eps)
    sin = math.sin(theta_prime)
    return LevPolynomial(n_eff, alpha, d, eps, s_prime, (1.0 - sin) / (2.0 * sin), theta_prime)


def lev_log(L: LevPolynomial, x) -> tuple[np.ndarray, np.ndarray]:
    """g(x) as (sign, log|g|) arrays."""
    x = np.asarray(x, dtype=float)
    diff = x - L.s_prime
    s, lp = jacobi_log(L.d, L.jacobi_a, L.jacobi_b, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        logabs = L.power * np.log1p(x) + 2.0 * lp - np.log(np.abs(diff))
    sign = np.sign(diff) * (s != 0) * (x > -1.0)
    near = (np.abs(diff) < 1e-14) & (diff != 0)
    if np.any(near):
        # p(x)/(x - s') ~ p'(s') at the removable singularity
        _, ld = jacobi_deriv_log(L.d, L.jacobi_a, L.jacobi_b, np.array([L.s_prime]))
        logabs = np.where(near, L.power * np.log1p(x) + 2.0 * ld[0] + np.log(np.abs(np.where(near, diff, 1.0))), logabs)
        sign = np.where(near, np.sign(diff), sign)
    sign = np.where(diff == 0, 0.0, sign)
    logabs = np.where(sign == 0, -np.inf, logabs)
    return sign, logabs


def lev_eval(L: LevPolynomial, x: float) -> SignedLogValue:
    s, l = lev_log(L, np.array([x]))
    if s[0] == 0:
        return SignedLogValue(0)
    return SignedLogValue(int(s[0]), float(l[0]))


def weighted_lev_log(L: LevPolynomial, x, exponent: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(1 - x^2)^exponent g(x); exponent defaults to alpha."""
    exponent = L.alpha if exponent is None else exponent
    x = np.asarray(x, dtype=float)
    s, l = lev_log(L, x)
    with np.errstate(divide="ignore"):
        return s, l + exponent * np.log1p(-x * x)


def g_at_one(L: LevPolynomial) -> SignedLogValue:
    """Closed form 2^k C(d+a+1, d)^2 / (1 - s')."""
    log_val = L.power * math.log(2.0) + 2.0 * log_binom(L.d + L.alpha + 1.0, L.d) - math.log1p(-L.s_prime)
    return SignedLogValue(1, log_val)


def weighted_mean(sign_log_fn, degree: int, exponent: float) -> SignedLogValue:
    """Exact mean of a polynomial of the given degree against (1-t^2)^exponent."""
    npts = degree // 2 + 2
    nodes, w = gauss_jacobi(npts, exponent, exponent)
    s, l = sign_log_fn(nodes)
    total, _ = logsumexp_signed(l, s, w)
    return total


def g_zero(L: LevPolynomial, weight_exponent: float | None = None) -> SignedLogValue:
    """Normalized mean g0 of g against (1-t^2)^weight_exponent."""
    exponent = L.alpha if weight_exponent is None else weight_exponent
    if abs(exponent - L.alpha) > 1e-12:
        raise ParameterDomainError("weight exponent must equal (n_eff - 3)/2")
    nodes, w = gauss_jacobi(max(L.d + 3, L.degree // 2 + 2), exponent, exponent)
    s, l = lev_log(L, nodes)
    total, _ = logsumexp_signed(l, s, w)
    if total.sign <= 0:
        raise CertificateInvalidError("g0 is not positive")
    return total


def expansion_coefficients(sign, logval, nodes, weights, alpha: float, k_max: int, log_at_one: float, scale_by_pk1: bool = True, with_noise: bool = False):
    """Normalized Gegenbauer coefficients of f from values at quadrature nodes.

    Returns a_k p_k(1)/f(1) (or a_k/f(1) with scale_by_pk1=False) where
    f = sum a_k p_k^{alpha,alpha}; weights must integrate (1-t^2)^alpha.
    With with_noise=True also returns the roundoff floor of each coefficient
    (the same normalization applied to the sum of absolute terms times 1e3 eps).
    """
    out = np.empty(k_max + 1)
    noise = np.empty(k_max + 1)
    log0 = log_norm_sq(0, alpha, alpha)
    for k in range(k_max + 1):
        ps, pl = jacobi_log(k, alpha, alpha, nodes)
        tot, absval = logsumexp_signed(logval + pl, sign * ps, weights)
        shift = -(log_norm_sq(k, alpha, alpha) - log0) - log_at_one
        if scale_by_pk1:
            shift += log_binom(k + alpha, k)
        out[k] = 0.0 if tot.sign == 0 else tot.sign * math.exp(min(tot.log_mag + shift, 700.0))
        noise[k] = 0.0 if absval.sign == 0 else 1e3 * np.finfo(float).eps * math.exp(min(absval.log_mag + shift, 700.0))
    if with_noise:
        return out, noise
    return out


def resolved_minimum(coeffs: np.ndarray, noise: np.ndarray) -> tuple[float, int]:
    """Smallest coefficient, treating those inside their roundoff floor as zero."""
    unresolved = np.abs(coeffs) <= noise
    vals = np.where(unresolved, 0.0, coeffs)
    return float(np.min(vals)), int(np.sum(unresolved))


def delsarte_coefficients(L: LevPolynomial, k_max: int | None = None, with_noise: bool = False):
    """a_k p_k(1)/g(1) for the expansion of g in p_k^{alpha,alpha}."""
    k_max = L.degree if k_max is None else k_max
    nodes, w = gauss_jacobi((L.degree + k_max) // 2 + 2, L.alpha, L.alpha)
    s, l = lev_log(L, nodes)
    return expansion_coefficients(s, l, nodes, w, L.alpha, k_max, g_at_one(L).log_mag, with_noise=with_noise)


def _mlev_log(n: int, d: int, eps: int) -> float:
    if eps == 1:
        return math.log(2.0) + log_binom(d + n - 1, n - 1)
    return log_binom(d + n - 1, n - 1) + math.log1p(d / (d + n - 1.0))


def m_lev(n: int, theta: float) -> SignedLogValue:
    """Levenshtein's bound M_Lev(n, theta) in closed binomial form."""
    if n < 2:
        raise ParameterDomainError(f"need n >= 2, got {n}")
    _check_angle(theta)
    d, eps = select_degree(n, theta)
    return SignedLogValue(1, _mlev_log(n, d, eps))


def m_lev_exact(n: int, theta: float) -> int:
    """Integer value of the binomial closed form."""
    d, eps = select_degree(n, theta)
    if eps == 1:
        return 2 * math.comb(d + n - 1, n - 1)
    return math.comb(d + n - 1, n - 1) + math.comb(d + n - 2, n - 1)


def quadrature_ratio(L: LevPolynomial) -> SignedLogValue:
    """g(1)/g0 with g0 by Gauss-Jacobi quadrature."""
    return g_at_one(L) / g_zero(L)


@dataclass(frozen=True)
class LinearizationReport:
    slope: SignedLogValue
    slope_fd: SignedLogValue
    prefactor: float
    implied_factor: float
    by_analogy: bool

    @property
    def fd_rel_error(self) -> float:
        return abs(math.expm1(self.slope_fd.log_mag - self.slope.log_mag))


def _weighted_at(L: LevPolynomial, x: float) -> float:
    s, l = weighted_lev_log(L, np.array([x]))
    return s[0], l[0]


def local_linearization(L: LevPolynomial, step: float | None = None) -> LinearizationReport:
    """Slope K with (1-x^2)^alpha g(x) ~ K (x - s') near the largest root.

    The exact slope is (1-s'^2)^alpha (1+s')^k p'(s')^2. It is cross-checked
    by a three-level Richardson one-sided difference with step n^-2.
    """
    sp = L.s_prime
    _, ld = jacobi_deriv_log(L.d, L.jacobi_a, L.jacobi_b, np.array([sp]))
    log_k = L.alpha * math.log1p(-sp * sp) + L.power * math.log1p(sp) + 2.0 * ld[0]
    slope = SignedLogValue(1, log_k)

    h = step if step is not None else L.n_eff ** -2.0
    # D(h)/K with W(s') = 0
    ratios = []
    for hh in (h, h / 2, h / 4):
        sgn, lw = _weighted_at(L, sp + hh)
        ratios.append(sgn * math.exp(lw - log_k) / hh)
    r1 = 2 * ratios[1] - ratios[0]
    r2 = 2 * ratios[2] - ratios[1]
    fd = (4 * r2 - r1) / 3.0
    slope_fd = SignedLogValue.from_float(fd) * slope

    by_analogy = L.case_eps != 1 or L.d % 2 == 1
    prefactor = math.nan
    implied = math.nan
    a1 = L.alpha + 1.0
    q = krasikov_q(L.d, a1)
    gap = 1.0 - q - sp * sp
    if L.rho > 0 and gap > 0:
        S = math.sqrt((L.d + a1) * (L.d + a1 + 1.0))
        b = math.sqrt(gap) * S / (1.0 - sp * sp)
        ir = 1.0 / (2.0 * L.rho)
        log_pref = (
            math.log1p(sp)
            - math.log1p(-sp)
            - 0.5 * math.log(gap)
            + math.log(2.0)
            + log_norm_sq(L.d, a1, a1)
            + math.log1p(ir)
            - math.log(math.pi)
            - 0.5 * math.log1p(1.0 / L.rho)
            + 2.0 * math.log(b)
        )
        prefactor = math.exp(min(log_pref, 700.0))
        implied = math.exp(log_k - log_pref)
    return LinearizationReport(slope, slope_fd, prefactor, implied, by_analogy)


def linearization_error(L: LevPolynomial, offset: float) -> tuple[float, float]:
    """Relative error of K(x - s') against (1-x^2)^alpha g(x) at x = s' -/+ offset."""
    rep = local_linearization(L)
    errs = []
    for h in (-offset, offset):
        sgn, lw = _weighted_at(L, L.s_prime + h)
        w = sgn * math.exp(lw - rep.slope.log_mag)
        errs.append(abs(h - w) / abs(w))
    return errs[0], errs[1]
