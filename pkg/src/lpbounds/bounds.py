"""Classical baselines, cap masses and the asymptotic improvement factors."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from scipy.special import betaln

from .jacobi import ParameterDomainError
from .levenshtein import m_lev
from .signedlog import SignedLogValue

LOG2 = math.log(2.0)


class GeometryInfeasibleError(ValueError):
    pass


def theta_star_function(theta: float) -> float:
    c, s = math.cos(theta), math.sin(theta)
    return c * math.log((1.0 + s) / (1.0 - s)) - (1.0 + c) * s


@lru_cache(maxsize=1)
def theta_star() -> float:
    """Root of theta_star_function in (pi/3, pi/2), by bisection."""
    lo, hi = math.pi / 3, math.pi / 2 - 1e-9
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if theta_star_function(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return 0.5 * (lo + hi)


# Regularized incomplete beta, log scale.

def _beta_cf(a: float, b: float, x: float) -> float:
    """Modified Lentz evaluation of the incomplete-beta continued fraction."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    dd = 1.0 - qab * x / qap
    if abs(dd) < tiny:
        dd = tiny
    dd = 1.0 / dd
    h = dd
    for m in range(1, 100000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        dd = 1.0 + aa * dd
        dd = tiny if abs(dd) < tiny else dd
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        dd = 1.0 / dd
        h *= dd * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        dd = 1.0 + aa * dd
        dd = tiny if abs(dd) < tiny else dd
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        dd = 1.0 / dd
        delta = dd * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def _log_front(a: float, b: float, x: float) -> float:
    return a * math.log(x) + b * math.log1p(-x) - math.log(a) - float(betaln(a, b))


def log_betainc(a: float, b: float, x: float) -> float:
    """log I_x(a, b)."""
    if x <= 0.0:
        return -math.inf
    if x >= 1.0:
        return 0.0
    if x < (a + 1.0) / (a + b + 2.0):
        return _log_front(a, b, x) + math.log(_beta_cf(a, b, x))
    comp = math.exp(_log_front(b, a, 1.0 - x)) * _beta_cf(b, a, 1.0 - x)
    return math.log1p(-comp)


def log_betainc_upper(a: float, b: float, x: float) -> float:
    """log (1 - I_x(a, b)) = log I_{1-x}(b, a)."""
    return log_betainc(b, a, 1.0 - x)


def _log_diff(la: float, lb: float) -> float:
    """log(exp(la) - exp(lb)) for la >= lb."""
    if lb == -math.inf:
        return la
    if lb >= la:
        return -math.inf
    return la + math.log1p(-math.exp(lb - la))


@dataclass(frozen=True)
class ComparisonGeometry:
    theta: float
    theta_prime: float
    s: float
    s_prime: float
    r: float
    R_big: float

    def root_residuals(self) -> tuple[float, float]:
        return root_residual(self.s, self.s_prime, self.r, self.r), root_residual(self.s, self.s_prime, self.r, self.R_big)


def root_residual(s: float, s_prime: float, r: float, x: float) -> float:
    den = math.sqrt(max((1.0 - r * r) * (1.0 - x * x), 0.0))
    return abs((s - r * x) - s_prime * den)


def geometry_from_cos(s: float, s_prime: float) -> ComparisonGeometry:
    """r and R for cosines s >= s_prime >= 0."""
    if not (s_prime <= s + 1e-15 and s_prime >= -1e-15 and s < 1.0):
        raise ParameterDomainError(f"need 0 <= s' <= s < 1, got s={s}, s'={s_prime}")
    s_prime = max(s_prime, 0.0)
    r = math.sqrt(max(s - s_prime, 0.0) / (1.0 - s_prime))
    if r == 0.0:
        # degenerate theta = theta': the other root solves s = s' sqrt(1 - x^2)
        R = math.sqrt(max(1.0 - (s / s_prime) ** 2, 0.0)) if s_prime > 0 else 0.0
    else:
        # (r^2 + s'^2 (1-r^2)) x^2 - 2 s r x + s^2 - s'^2 (1-r^2) = 0, one root is r
        a2 = r * r + s_prime * s_prime * (1.0 - r * r)
        c0 = s * s - s_prime * s_prime * (1.0 - r * r)
        R = c0 / (a2 * r)
    geo = ComparisonGeometry(math.acos(s), math.acos(s_prime), s, s_prime, r, R)
    for res in geo.root_residuals():
        if res > 1e-10:
            raise GeometryInfeasibleError(f"root equation residual {res}")
    return geo


def geometry(theta: float, theta_prime: float) -> ComparisonGeometry:
    if not (0.0 < theta <= theta_prime <= math.pi / 2 + 1e-15):
        raise ParameterDomainError("need 0 < theta <= theta' <= pi/2")
    geo = geometry_from_cos(math.cos(theta), math.cos(theta_prime))
    return ComparisonGeometry(theta, theta_prime, geo.s, geo.s_prime, geo.r, geo.R_big)


def big_r_closed_form(theta: float, theta_prime: float) -> float:
    """The arctan expression for R, used as an independent check."""
    s, sp = math.cos(theta), math.cos(theta_prime)
    r = math.sqrt((s - sp) / (1.0 - sp))
    return math.cos(2.0 * math.atan(s / math.sqrt((1.0 - s) * (s - sp))) + math.acos(r) - math.pi)


def log_cap_mass_radius(n: int, r: float) -> float:
    """log of the normalized (1-t^2)^((n-3)/2) mass of [r, 1]."""
    if r <= 0.0:
        return math.log(0.5)
    return math.log(0.5) + log_betainc((n - 1) / 2.0, 0.5, 1.0 - r * r)


def cap_mass(n: int, theta: float, theta_prime: float) -> float:
    return math.exp(log_cap_mass(n, theta, theta_prime))


def log_cap_mass(n: int, theta: float, theta_prime: float) -> float:
    if n < 3:
        raise ParameterDomainError("cap mass needs n >= 3")
    if not (0.0 < theta <= theta_prime <= math.pi / 2 + 1e-15):
        raise ParameterDomainError("need 0 < theta <= theta' <= pi/2")
    s, sp = math.cos(theta), math.cos(theta_prime)
    return log_cap_mass_radius(n, math.sqrt(max(s - sp, 0.0) / (1.0 - sp)))


def log_angular_fraction(m: int, eta: float) -> float:
    """Fraction of S^{m-1} within angle eta of a pole (m = 1: the half line)."""
    if m == 1:
        return math.log(0.5) if eta < math.pi else 0.0
    if eta >= math.pi:
        return 0.0
    if eta <= math.pi / 2:
        return math.log(0.5) + log_betainc((m - 1) / 2.0, 0.5, math.sin(eta) ** 2)
    return math.log1p(-0.5 * math.exp(log_betainc((m - 1) / 2.0, 0.5, math.sin(eta) ** 2)))


def log_region_mass(n: int, m: int, r_lo: float, r_hi: float, eta: float) -> float:
    """log of the relative mass of the region in the ball B^m.

    The density of the first m coordinates of a uniform point on S^{n-1}
    is proportional to (1-|u|^2)^((n-m-2)/2); |u|^2 is Beta(m/2, (n-m)/2).
    """
    a, b = m / 2.0, (n - m) / 2.0
    lo, hi = max(r_lo, 0.0) ** 2, min(r_hi, 1.0) ** 2
    if hi <= lo:
        return -math.inf
    radial = _log_diff(log_betainc_upper(a, b, lo), log_betainc_upper(a, b, hi))
    return radial + log_angular_fraction(m, eta)


def kl_exponent(theta_prime: float) -> float:
    sn = math.sin(theta_prime)
    a = (1.0 + sn) / (2.0 * sn)
    b = (1.0 - sn) / (2.0 * sn)
    out = a * math.log2(a)
    if b > 0:
        out -= b * math.log2(b)
    return out


def packing_baseline(n: int, theta: float | None = None) -> SignedLogValue:
    """sin^n(theta/2) M_Lev(n, theta); theta defaults to theta*."""
    theta = theta_star() if theta is None else theta
    if not (math.pi / 3 - 1e-15 <= theta <= math.pi / 2 + 1e-15):
        raise ParameterDomainError("packing baseline needs pi/3 <= theta <= pi/2")
    return SignedLogValue(1, n * math.log(math.sin(theta / 2)) + m_lev(n, theta).log_mag)


@dataclass(frozen=True)
class CodesBaseline:
    classical: SignedLogValue  # M_Lev(n+1, theta')/mu_n
    comparison: SignedLogValue  # M_Lev(n-1, theta')/mu_n


def codes_baseline(n: int, theta: float, theta_prime: float) -> CodesBaseline:
    if not theta < theta_prime:
        raise ParameterDomainError("need theta < theta'")
    lm = log_cap_mass(n, theta, theta_prime)
    return CodesBaseline(
        SignedLogValue(1, m_lev(n + 1, theta_prime).log_mag - lm),
        SignedLogValue(1, m_lev(n - 1, theta_prime).log_mag - lm),
    )


@dataclass(frozen=True)
class FactorReport:
    m: int
    analytic_factor: float
    mlev_ratio_exponent: float
    geometric_average: float


def analytic_factor(m: int, theta_prime: float, n: int | None = None) -> float:
    if m <= 0:
        raise ParameterDomainError("m must be positive")
    sp = math.cos(theta_prime)
    if m == 1:
        return 1.0 / math.e
    if m == 2:
        return math.sqrt(math.pi / (6.0 * math.e * (1.0 - sp)))
    if m == 3:
        return 1.0 / (2.0 * (1.0 - sp))
    if m == 4:
        return 3.0 * math.sqrt(math.e * math.pi) / (math.sqrt(2.0) * (5.0 * (1.0 - sp)) ** 1.5)
    if n is None:
        raise ParameterDomainError("the large-m factor needs n")
    return math.sqrt(math.pi * m) * math.exp(m * m / (8.0 * n)) / (math.e**2 * (1.0 - sp) ** ((m - 1) / 2.0))


def asymptotic_factor(m: int, theta_prime: float, n: int | None = None) -> FactorReport:
    af = analytic_factor(m, theta_prime, n)
    expo = (m + 1) * kl_exponent(theta_prime)
    return FactorReport(m, af, expo, af * 2.0**-expo)


def constant_codim_report(k: int, theta: float, theta_prime: float) -> dict:
    """Heuristic limiting quantities for averaging over V_{n-k} with k fixed."""
    if k < 2:
        raise ParameterDomainError("k must be at least 2")
    geo = geometry(theta, theta_prime)
    s, sp, R = geo.s, geo.s_prime, geo.R_big
    c2 = (s - sp * (1.0 - R * R)) / (R * R)
    if not 0.0 <= c2 <= 1.0:
        raise GeometryInfeasibleError(f"cos^2(eta_2) = {c2} outside [0, 1]")
    expo = math.log2(math.sin(theta / 2) / (R * math.sqrt(1.0 - c2)))
    return {
        "cos_eta2": math.sqrt(c2),
        "exponent_per_dim": expo,
        "at_least_minus_half": expo >= -0.5,
        "heuristic": True,
    }
