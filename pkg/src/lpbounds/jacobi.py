"""Jacobi polynomials p_d^{a,b} normalized by p_d(1) = C(d+a, d).

Values are carried as (sign, log|.|) so that degrees and exponents in the
thousands do not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

from .signedlog import SignedLogValue

SQRT_7_6 = math.sqrt(7.0 / 6.0)
SUPNORM_MIN_EXPONENT = (1.0 + math.sqrt(2.0)) / 4.0


class ParameterDomainError(ValueError):
    pass


class NoRootError(ValueError):
    pass


@dataclass(frozen=True)
class JacobiParam:
    alpha: float
    beta: float
    d: int

    def __post_init__(self):
        if not (self.alpha > -1 and self.beta > -1):
            raise ParameterDomainError(f"need alpha, beta > -1, got {self.alpha}, {self.beta}")
        if int(self.d) != self.d or self.d < 0:
            raise ParameterDomainError(f"degree must be a non-negative integer, got {self.d}")
        object.__setattr__(self, "d", int(self.d))


def log_binom(top: float, k: float) -> float:
    """log C(top, k) with the Gamma-function extension."""
    return float(gammaln(top + 1) - gammaln(k + 1) - gammaln(top - k + 1))


def jacobi_log(d: int, a: float, b: float, x) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized p_d^{a,b}(x) as (sign, log|value|) arrays.

    Standard three-term recurrence, renormalized every step by the running
    maximum of the two carried values.
    """
    return _recurrence(d, a, b, x, keep_all=False)


def jacobi_log_all(d: int, a: float, b: float, x) -> tuple[np.ndarray, np.ndarray]:
    """Same as jacobi_log for all degrees 0..d; arrays of shape (d+1, len(x))."""
    return _recurrence(d, a, b, x, keep_all=True)


def _recurrence(d, a, b, x, keep_all):
    x = np.asarray(x, dtype=float)
    shape = x.shape
    x = x.ravel()
    if keep_all:
        signs = np.empty((d + 1, x.size))
        logs = np.empty((d + 1, x.size))
        signs[0], logs[0] = 1.0, 0.0
    if d == 0:
        if keep_all:
            return signs, logs
        return np.ones(shape), np.zeros(shape)
    p0 = np.ones_like(x)
    p1 = 0.5 * ((a + b + 2.0) * x + (a - b))
    logscale = np.zeros_like(x)
    if keep_all:
        signs[1] = np.sign(p1)
        with np.errstate(divide="ignore"):
            logs[1] = np.log(np.abs(p1))
    ab2 = a * a - b * b
    for k in range(2, d + 1):
        c = 2.0 * k + a + b
        a1 = 2.0 * k * (k + a + b) * (c - 2.0)
        a2 = (c - 1.0) * ab2
        a3 = (c - 1.0) * c * (c - 2.0)
        a4 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * c
        p2 = ((a2 + a3 * x) * p1 - a4 * p0) / a1
        p0, p1 = p1, p2
        m = np.maximum(np.abs(p0), np.abs(p1))
        m[m == 0.0] = 1.0
        p0 = p0 / m
        p1 = p1 / m
        logscale += np.log(m)
        if keep_all:
            signs[k] = np.sign(p1)
            with np.errstate(divide="ignore"):
                logs[k] = np.log(np.abs(p1)) + logscale
    if keep_all:
        return signs, logs
    sign = np.sign(p1)
    with np.errstate(divide="ignore"):
        logabs = np.log(np.abs(p1)) + logscale
    return sign.reshape(shape), logabs.reshape(shape)


def jacobi_values(d: int, a: float, b: float, x) -> np.ndarray:
    """Plain float values; only for moderate sizes."""
    s, l = jacobi_log(d, a, b, x)
    return s * np.exp(l)


def jacobi_eval(p: JacobiParam, x: float) -> SignedLogValue:
    if not -1.0 <= x <= 1.0:
        raise ParameterDomainError(f"x must lie in [-1, 1], got {x}")
    s, l = jacobi_log(p.d, p.alpha, p.beta, np.array([x]))
    if s[0] == 0:
        return SignedLogValue(0)
    return SignedLogValue(int(s[0]), float(l[0]))


def jacobi_deriv_log(d: int, a: float, b: float, x) -> tuple[np.ndarray, np.ndarray]:
    """Derivative via d/dx p_d^{a,b} = (d+a+b+1)/2 * p_{d-1}^{a+1,b+1}."""
    x = np.asarray(x, dtype=float)
    if d == 0:
        return np.zeros(x.shape), np.full(x.shape, -np.inf)
    s, l = jacobi_log(d - 1, a + 1.0, b + 1.0, x)
    return s, l + math.log(0.5 * (d + a + b + 1.0))


def log_norm_sq(d: int, a: float, b: float) -> float:
    if d == 0:
        return float((a + b + 1.0) * math.log(2.0) + gammaln(a + 1) + gammaln(b + 1) - gammaln(a + b + 2))
    return float(
        (a + b + 1.0) * math.log(2.0)
        - math.log(2.0 * d + a + b + 1.0)
        + gammaln(d + a + 1)
        + gammaln(d + b + 1)
        - gammaln(d + a + b + 1)
        - gammaln(d + 1)
    )


def jacobi_norm_sq(p: JacobiParam) -> SignedLogValue:
    """Squared L2 norm against (1-t)^a (1+t)^b dt."""
    return SignedLogValue(1, log_norm_sq(p.d, p.alpha, p.beta))


def jacobi_matrix(d: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric tridiagonal (Golub-Welsch) matrix whose eigenvalues are the roots."""
    k = np.arange(d, dtype=float)
    c = 2.0 * k + a + b
    diag = np.empty(d)
    with np.errstate(invalid="ignore", divide="ignore"):
        diag[:] = (b * b - a * a) / (c * (c + 2.0))
    diag[0] = (b - a) / (a + b + 2.0)
    off = np.empty(max(d - 1, 0))
    if d > 1:
        k = np.arange(1, d, dtype=float)
        c = 2.0 * k + a + b
        with np.errstate(invalid="ignore", divide="ignore"):
            off[:] = np.sqrt(4.0 * k * (k + a) * (k + b) * (k + a + b) / (c * c * (c + 1.0) * (c - 1.0)))
        off[0] = math.sqrt(4.0 * (1.0 + a) * (1.0 + b) / ((a + b + 2.0) ** 2 * (a + b + 3.0)))
    return diag, off


def gauss_jacobi(npts: int, a: float, b: float, normalized: bool = True, log_weights: bool = False):
    """Gauss-Jacobi nodes and weights for (1-t)^a (1+t)^b.

    Nodes are eigenvalues of the Golub-Welsch matrix. Weights come from the
    Christoffel function 1/sum_k p_k(x)^2/||p_k||^2 in log space, which keeps
    full relative accuracy for the tiny weights near the endpoints. With
    normalized=True the weights sum to one.
    """
    diag, off = jacobi_matrix(npts, a, b)
    if npts == 1:
        nodes = diag.copy()
    else:
        nodes = eigh_tridiagonal(diag, off, eigvals_only=True)
    _, logs = jacobi_log_all(npts - 1, a, b, nodes)
    lnorm = np.array([log_norm_sq(k, a, b) for k in range(npts)])
    terms = 2.0 * logs - lnorm[:, None]
    top = terms.max(axis=0)
    lw = -(top + np.log(np.exp(terms - top).sum(axis=0)))
    if normalized:
        lw = lw - np.logaddexp.reduce(lw)
    if log_weights:
        return nodes, lw
    return nodes, np.exp(lw)


def _sign_at(d: int, a: float, b: float, x: float) -> float:
    return float(jacobi_log(d, a, b, np.array([x]))[0][0])


def largest_root(p: JacobiParam) -> float:
    """Largest zero t_{1,d}^{a,b}, eigenvalue estimate polished by bisection."""
    if p.d == 0:
        raise NoRootError("degree-0 polynomial has no roots")
    d, a, b = p.d, p.alpha, p.beta
    if d == 1:
        return (b - a) / (a + b + 2.0)
    diag, off = jacobi_matrix(d, a, b)
    lam = float(eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(d - 1, d - 1))[0])
    # p > 0 to the right of its largest root.
    h = 1e-12
    lo, hi = lam - h, lam + h
    while _sign_at(d, a, b, min(hi, 1.0)) <= 0 and hi < 1.0:
        h *= 4.0
        hi = lam + h
    hi = min(hi, 1.0)
    h = 1e-12
    while _sign_at(d, a, b, lo) > 0:
        h *= 4.0
        lo = lam - h
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        s = _sign_at(d, a, b, mid)
        if s == 0:
            return mid
        if s > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def diffroots_bound(d: int, alpha: float) -> float:
    """Upper bound for t_{1,d}^{a,a} valid for d >= 5, a > 0."""
    if d < 5 or alpha <= 0:
        raise ParameterDomainError("bound needs d >= 5 and alpha > 0")
    q = krasikov_q(d, alpha)
    corr = 3.0 * (alpha + 1.0) ** (4.0 / 3.0) / (
        2.0 * d ** (2.0 / 3.0) * (d + alpha + 1.0) ** (2.0 / 3.0) * (d + 2.0 * alpha + 1.0) ** (2.0 / 3.0)
    )
    return math.sqrt(1.0 - q) * (1.0 - corr)


def krasikov_q(d: int, alpha: float) -> float:
    return (alpha * alpha - 1.0) / ((d + alpha) * (d + alpha + 1.0))


@dataclass(frozen=True)
class KrasikovFrame:
    d: int
    alpha: float
    q: float
    omega_fn: Callable
    b_fn: Callable
    f0: SignedLogValue
    remainder_bound_fn: Callable

    @property
    def right_end(self) -> float:
        return math.sqrt(1.0 - self.q)

    def f_over_f0(self, x) -> np.ndarray:
        """f_{d,a}(x)/f_{d,a}(0) evaluated directly from the polynomial."""
        x = np.asarray(x, dtype=float)
        d, a, q = self.d, self.alpha, self.q
        s, l = jacobi_log(d, a, a, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            lf = 0.25 * np.log(np.maximum((1.0 - q - x * x) * (d + a) * (d + a + 1.0), 0.0)) + 0.5 * a * np.log1p(-x * x) + l
        return s * self.f0.sign * np.exp(lf - self.f0.log_mag)


def krasikov_frame(d: int, alpha: float) -> KrasikovFrame:
    if d < 2 or d % 2:
        raise ParameterDomainError("Krasikov frame needs an even degree d >= 2")
    if alpha < SQRT_7_6:
        raise ParameterDomainError(f"Krasikov frame needs alpha >= sqrt(7/6), got {alpha}")
    q = krasikov_q(d, alpha)
    S = math.sqrt((d + alpha) * (d + alpha + 1.0))
    sq = math.sqrt(q)

    def omega(x):
        x = np.asarray(x, dtype=float)
        y1 = np.clip(x / math.sqrt(1.0 - q), -1.0, 1.0)
        y2 = np.clip(sq * x / np.sqrt((1.0 - q) * (1.0 - x * x)), -1.0, 1.0)
        return S * (np.arcsin(y1) - sq * np.arcsin(y2))

    def bfun(x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.maximum(1.0 - q - x * x, 0.0)) * S / (1.0 - x * x)

    def rbound(x):
        x = np.asarray(x, dtype=float)
        gap = np.maximum(1.0 - q - x * x, 0.0)
        with np.errstate(divide="ignore"):
            if q < 0.5:
                return 2.0 * (1.0 - x * x) * x / ((1.0 - q) * gap**1.5 * S)
            return (1.0 + q) * x / (4.0 * gap**1.5 * S)

    half = d // 2
    log_f0 = -half * math.log(4.0) + log_binom(d + alpha, half) + 0.25 * math.log(d * d + 2 * d * alpha + d + alpha + 1.0)
    f0 = SignedLogValue(-1 if half % 2 else 1, log_f0)
    return KrasikovFrame(d, alpha, q, omega, bfun, f0, rbound)


KRASIKOV_SLACK = 1e-11


def krasikov_violations(d: int, alpha: float, points: int = 1000) -> tuple[int, float]:
    """Count grid points of [0, sqrt(1-q)] where |f/f0 - cos w| exceeds the remainder bound.

    Also returns the largest excess (negative when every point is inside).
    """
    fr = krasikov_frame(d, alpha)
    x = np.linspace(0.0, fr.right_end, points)
    dev = np.abs(fr.f_over_f0(x) - np.cos(fr.omega_fn(x)))
    excess = dev - fr.remainder_bound_fn(x) - KRASIKOV_SLACK
    return int(np.sum(excess > 0)), float(np.max(excess))


def supnorm_bound(p: JacobiParam) -> SignedLogValue:
    """Upper bound for max (1-x)^{a+1/2} (1+x)^{b+1/2} p(x)^2 on [-1, 1]."""
    if p.d < 6 or p.alpha < SUPNORM_MIN_EXPONENT or p.beta < SUPNORM_MIN_EXPONENT:
        raise ParameterDomainError("sup-norm bound needs d >= 6 and alpha, beta >= (1+sqrt 2)/4")
    a = p.alpha
    return SignedLogValue(1, math.log(3.0) + jacobi_norm_sq(p).log_mag + math.log(a) / 3.0 + math.log1p(a / p.d) / 6.0)


def weighted_square_log(p: JacobiParam, x) -> np.ndarray:
    """log of (1-x)^{a+1/2} (1+x)^{b+1/2} p(x)^2."""
    x = np.asarray(x, dtype=float)
    s, l = jacobi_log(p.d, p.alpha, p.beta, x)
    with np.errstate(divide="ignore"):
        out = (p.alpha + 0.5) * np.log1p(-x) + (p.beta + 0.5) * np.log1p(x) + 2.0 * l
    return np.where(s == 0, -np.inf, out)


def magnitude_ratio(d: int, alpha: float) -> tuple[float, float]:
    """(exact f0^2/||p||^2, large-size asymptotic form) for even d."""
    if d < 2 or d % 2:
        raise ParameterDomainError("magnitude ratio needs an even degree d >= 2")
    frame = krasikov_frame(d, alpha)
    exact = math.exp(2.0 * frame.f0.log_mag - log_norm_sq(d, alpha, alpha))
    asym = math.sqrt((d + alpha) * (d + alpha + 1.0)) * (2 * d + 2 * alpha + 1.0) / (math.pi * math.sqrt(d * (d + 2 * alpha)))
    return exact, asym


def magnitude_asymptotic(d: int, alpha: float) -> float:
    """Large-size form of f0^2/||p||^2 that the exact ratio actually approaches.

    Differs from the second value of magnitude_ratio by the factor
    sqrt(d(d+2a))/(d+a), which tends to 1 only when a/d -> 0.
    """
    return (2 * d + 2 * alpha + 1.0) / math.pi * math.sqrt((d + alpha) * (d + alpha + 1.0)) / (d + alpha)


def corollary_ratio(d: int, alpha: float) -> float:
    """f0^2/||p||^2 predicted by the rho-form with alpha/d = 1/(2 rho)."""
    rho = d / (2.0 * alpha)
    return d * 2.0 * (1.0 + 1.0 / (2.0 * rho)) ** 2 / (math.pi * math.sqrt(1.0 + 1.0 / rho))
