"""Averaged LP certificates H for codes and packings, their sign checks and bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln

from .bounds import (
    ComparisonGeometry,
    geometry_from_cos,
    log_cap_mass_radius,
    log_region_mass,
)
from .jacobi import ParameterDomainError, gauss_jacobi
from .levenshtein import (
    LevPolynomial,
    delsarte_coefficients,
    resolved_minimum,
    g_at_one,
    g_zero,
    lev_polynomial,
    weighted_lev_log,
)
from .signedlog import SignedLogValue, logsumexp_signed

FEASIBILITY_TOL = 1e-9
MARGINAL_TOL = 1e-6
# integrand values below exp(-LOG_CUTOFF) times the peak are dropped
LOG_CUTOFF = 60.0
GRADES = np.array([0, 0.25, 0.5, 1, 1.5, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64, 96, 128, 192, 256, 384, 512, 768, 1024, 1536, 2048, 3072, 4096])


class QuadratureError(RuntimeError):
    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class DegenerateProposalError(RuntimeError):
    pass


@dataclass(frozen=True)
class CapAnnulusRegion:
    m: int
    r_lo: float
    r_hi: float
    eta: float = math.pi / 2

    def __post_init__(self):
        if self.m < 1:
            raise ParameterDomainError("region dimension must be >= 1")
        if not (0.0 <= self.r_lo <= self.r_hi <= 1.0):
            raise ParameterDomainError(f"need 0 <= r_lo <= r_hi <= 1, got {self.r_lo}, {self.r_hi}")
        if not (0.0 <= self.eta <= math.pi):
            raise ParameterDomainError("eta must lie in [0, pi]")

    def contains(self, u) -> np.ndarray:
        """Membership for points u of shape (..., m); the pole is the last axis."""
        u = np.asarray(u, dtype=float)
        norm = np.linalg.norm(u, axis=-1)
        return (norm >= self.r_lo) & (norm <= self.r_hi) & (u[..., -1] >= norm * math.cos(self.eta) - 1e-15)

    def log_mass(self, n: int) -> float:
        return log_region_mass(n, self.m, self.r_lo, self.r_hi, self.eta)


@dataclass(frozen=True)
class PackingKernelSpec:
    n: int
    theta: float
    r: float
    delta: float = 0.0

    @property
    def support_radius(self) -> float:
        return self.r + self.delta


@dataclass
class CertificateReport:
    kind: str
    n: int
    m: int
    theta: float
    theta_prime: float
    theta_eff: float
    delta: float
    eta: float
    grid: list
    h_values: list
    max_forbidden: SignedLogValue
    max_ratio: float
    h_at_one: SignedLogValue
    h_zero: SignedLogValue
    bound: SignedLogValue
    baseline: SignedLogValue
    feasible: bool
    marginal: bool
    psd_min_coeff: float
    tolerance: float = FEASIBILITY_TOL
    violating_point: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def improvement_factor(self) -> float:
        return math.exp(self.bound.log_mag - self.baseline.log_mag)


# quadrature plumbing

def _gl_rule(breaks: np.ndarray, q: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(q)
    lo, hi = breaks[:-1], breaks[1:]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo))[:, None] + half[:, None] * x[None, :]
    weights = half[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def _breaks(lo: float, hi: float, scale: float, from_top: bool = False, uniform: int = 16) -> np.ndarray:
    """Panel edges graded at the given scale from one end, merged with a uniform split."""
    if hi <= lo:
        return np.array([lo, hi])
    span = hi - lo
    g = GRADES * scale
    g = g[g < span]
    pts = hi - g if from_top else lo + g
    pts = np.concatenate([pts, np.linspace(lo, hi, uniform + 1)])
    pts = np.unique(np.clip(pts, lo, hi))
    # drop slivers
    keep = np.concatenate([[True], np.diff(pts) > 1e-14 * max(1.0, abs(hi))])
    pts = pts[keep]
    pts[-1] = hi
    pts[0] = lo
    return pts


def _sum_log(sign, logv, weights) -> tuple[SignedLogValue, SignedLogValue]:
    return logsumexp_signed(logv, sign, weights)


def _converged(evaluate, qs=(10, 16), rel_tol=1e-6):
    """Run evaluate(q) at two orders and compare against the absolute integral."""
    coarse, _ = evaluate(qs[0])
    fine, absval = evaluate(qs[1])
    if absval.sign == 0:
        return fine, absval, 0.0
    err = math.exp((coarse - fine).log_mag - absval.log_mag) if (coarse - fine).sign != 0 else 0.0
    if err > rel_tol:
        raise QuadratureError(f"quadrature did not converge (relative change {err:.2e})", estimate=fine)
    return fine, absval, err


# codes

@dataclass(frozen=True)
class CodesSetup:
    n: int
    m: int
    theta: float
    theta_prime: float
    lev: LevPolynomial
    geo: ComparisonGeometry

    @property
    def alpha(self) -> float:
        return self.lev.alpha

    @property
    def theta_eff(self) -> float:
        return self.geo.theta_prime

    def region(self, delta: float = 0.0, eta: float = math.pi / 2) -> CapAnnulusRegion:
        return CapAnnulusRegion(self.m, max(self.geo.r - delta, 0.0), self.geo.R_big, eta)


def codes_setup(n: int, theta: float, theta_prime: float, m: int = 1) -> CodesSetup:
    """Levenshtein polynomial for M(n-m, theta') with the geometry snapped to its root."""
    if not (0 < theta < theta_prime <= math.pi / 2 + 1e-15):
        raise ParameterDomainError("need 0 < theta < theta' <= pi/2")
    if not 1 <= m <= n - 3:
        raise ParameterDomainError("need 1 <= m <= n - 3")
    L = lev_polynomial(n - m, theta_prime)
    s = math.cos(theta)
    if L.s_prime > s:
        raise ParameterDomainError("theta' too close to theta: the polynomial root exceeds cos(theta)")
    geo = geometry_from_cos(s, L.s_prime)
    return CodesSetup(n, m, theta, theta_prime, L, geo)


def log_frame_constant(n: int, m: int) -> float:
    """log C_{n,m}; with it H(t) is the actual average over frames."""
    return float(
        -m * math.log(math.pi)
        + gammaln(n / 2) + gammaln((n - 1) / 2)
        - gammaln((n - m) / 2) - gammaln((n - m - 1) / 2)
    )


def _normalizer(n: int, m: int, t: float) -> float:
    return log_frame_constant(n, m) - 0.5 * (n - 3) * math.log1p(-t * t)


def _codes_log_integrand(L: LevPolynomial, t: float, inner, du, dv):
    den = np.sqrt(du * dv)
    x = (t - inner) / den
    inside = np.abs(x) < 1.0
    s, lw = weighted_lev_log(L, np.clip(x, -1.0, 1.0))
    with np.errstate(divide="ignore"):
        logv = lw + L.alpha * (np.log(du) + np.log(dv))
    return np.where(inside, s, 0.0), np.where(inside, logv, -np.inf)


def _radial_cut(alpha: float, lo: float, hi: float, extra_power: float = 0.0) -> float:
    """Radius beyond which (1-u^2)^alpha u^extra has dropped by exp(-LOG_CUTOFF)."""
    if alpha <= 0:
        return hi
    target = alpha * math.log1p(-lo * lo) - LOG_CUTOFF - extra_power * 2.0
    v = 1.0 - math.exp(target / alpha)
    return min(hi, math.sqrt(max(v, lo * lo)))


def _radial_rule(setup: CodesSetup, region: CapAnnulusRegion, q: int):
    n = setup.n
    hi = _radial_cut(setup.alpha, region.r_lo, region.r_hi, extra_power=region.m)
    br = _breaks(region.r_lo, hi, 1.0 / n)
    return _gl_rule(br, q)


def h_codes_m1(n: int, theta: float, theta_prime: float, delta: float, t: float, setup: CodesSetup | None = None) -> SignedLogValue:
    """Frame-averaged H(t) for m = 1 with region [r - delta, R]."""
    setup = setup or codes_setup(n, theta, theta_prime, 1)
    return _h_codes_m1(setup, setup.region(delta), t)[0]


def _h_codes_m1(setup: CodesSetup, region: CapAnnulusRegion, t: float, qs=(10, 16)):
    if not -1.0 < t < 1.0:
        raise ParameterDomainError("t must lie in (-1, 1)")
    L = setup.lev

    def evaluate(q):
        u, w = _radial_rule(setup, region, q)
        U, V = np.meshgrid(u, u, indexing="ij")
        W = np.outer(w, w)
        du = 1.0 - U * U
        s, lv = _codes_log_integrand(L, t, U * V, du, du.T)
        return _sum_log(s.ravel(), lv.ravel(), W.ravel())

    val, absval, _ = _converged(evaluate, qs)
    c = _normalizer(setup.n, 1, t)
    return SignedLogValue(val.sign, val.log_mag + c) if val.sign else val, SignedLogValue(absval.sign, absval.log_mag + c)


def h_codes_m2(n: int, theta: float, theta_prime: float, region: CapAnnulusRegion, t: float, setup: CodesSetup | None = None) -> SignedLogValue:
    setup = setup or codes_setup(n, theta, theta_prime, 2)
    return _h_codes_m2(setup, region, t)[0]


def _h_codes_m2(setup: CodesSetup, region: CapAnnulusRegion, t: float, qs=(10, 16)):
    if region.m != 2:
        raise ParameterDomainError("region must have m = 2")
    if region.eta > math.pi / 2:
        raise ParameterDomainError("the planar reduction needs eta <= pi/2")
    if not -1.0 < t < 1.0:
        raise ParameterDomainError("t must lie in (-1, 1)")
    L = setup.lev
    eta = region.eta

    def evaluate(q):
        rho, w = _radial_rule(setup, region, q)
        if eta == 0.0:
            return SignedLogValue(0), SignedLogValue(0)
        phi, wp = _gl_rule(np.array([0.0, 2.0 * eta]), q)
        wp = 2.0 * wp * (2.0 * eta - phi)
        # symmetric in (rho1, rho2): upper triangle, off-diagonal doubled
        i, j = np.triu_indices(rho.size)
        pair_w = w[i] * w[j] * rho[i] * rho[j] * np.where(i == j, 1.0, 2.0)
        R1, R2 = rho[i][:, None], rho[j][:, None]
        Wt = pair_w[:, None] * wp[None, :]
        s, lv = _codes_log_integrand(L, t, R1 * R2 * np.cos(phi)[None, :], 1.0 - R1 * R1, 1.0 - R2 * R2)
        return _sum_log(s.ravel(), lv.ravel(), Wt.ravel())

    val, absval, _ = _converged(evaluate, qs)
    c = _normalizer(setup.n, 2, t)
    shift = lambda v: SignedLogValue(v.sign, v.log_mag + c) if v.sign else v
    return shift(val), shift(absval)


def _sample_directions(m: int, eta: float, size: int, rng) -> np.ndarray:
    """Uniform directions on S^{m-1} within angle eta of the last axis."""
    if m == 1:
        if eta < math.pi:
            return np.ones((size, 1))
        return rng.choice([-1.0, 1.0], size=(size, 1))
    if eta >= math.pi:
        g = rng.standard_normal((size, m))
        return g / np.linalg.norm(g, axis=1, keepdims=True)
    if m == 2:
        ang = rng.uniform(-eta, eta, size)
        return np.stack([np.sin(ang), np.cos(ang)], axis=1)
    zmax = 1.0 - math.cos(eta)
    out = np.empty(0)
    # z = 1 - cos(angle) has density ~ (z(2-z))^((m-3)/2) on [0, zmax]
    while out.size < size:
        k = 2 * (size - out.size) + 16
        z = zmax * rng.uniform(size=k) ** (2.0 / (m - 1))
        acc = rng.uniform(size=k) < ((2.0 - z) / 2.0) ** ((m - 3) / 2.0)
        out = np.concatenate([out, z[acc]])
    z = out[:size]
    g = rng.standard_normal((size, m - 1))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    c = 1.0 - z
    return np.concatenate([g * np.sqrt(np.maximum(1.0 - c * c, 0.0))[:, None], c[:, None]], axis=1)


def _log_cap_area(m: int, eta: float) -> float:
    from .bounds import log_angular_fraction

    if m == 1:
        return 0.0 if eta < math.pi else math.log(2.0)
    log_sphere = math.log(2.0) + 0.5 * m * math.log(math.pi) - float(gammaln(m / 2))
    return log_sphere + log_angular_fraction(m, eta)


def _sample_region(region: CapAnnulusRegion, alpha: float, size: int, rng):
    """Points of the region with a truncated-exponential radial proposal; returns (u, log density)."""
    m = region.m
    lo, hi = region.r_lo**2, region.r_hi**2
    # decay rate of (1-y)^alpha at lo; a decreasing y-power must not steepen the
    # proposal, or the weights become heavy-tailed
    slope = alpha / (1.0 - lo) - max(m / 2.0 - 1.0, 0.0) / max(lo, 1e-300)
    lam = max(slope, 1.0)
    span = hi - lo
    # y = rho^2 on [lo, hi] with density lam exp(-lam (y - lo)) / (1 - exp(-lam span))
    log_norm = math.log(lam) - math.log(-math.expm1(-lam * span))
    y = lo - np.log1p(-rng.uniform(size=size) * (-math.expm1(-lam * span))) / lam
    y = np.clip(y, lo, hi)
    rho = np.sqrt(y)
    log_py = log_norm - lam * (y - lo)
    # density of u in R^m: p_y * 2 rho / (rho^{m-1} * cap area)
    with np.errstate(divide="ignore"):
        log_pu = log_py + math.log(2.0) + (2 - m) * np.log(rho) - _log_cap_area(m, region.eta)
    dirs = _sample_directions(m, region.eta, size, rng)
    return rho[:, None] * dirs, log_pu


def h_codes_general(n: int, theta: float, theta_prime: float, region: CapAnnulusRegion, t: float, sample_count: int, rng=None, seed: int = 0, setup: CodesSetup | None = None) -> dict:
    """Importance-sampled H(t) over B^m x B^m; returns estimate and standard error."""
    setup = setup or codes_setup(n, theta, theta_prime, region.m)
    rng = np.random.default_rng(seed) if rng is None else rng
    L = setup.lev
    a = L.alpha
    u, lpu = _sample_region(region, a, sample_count, rng)
    v, lpv = _sample_region(region, a, sample_count, rng)
    nu = np.sum(u * u, axis=1)
    nv = np.sum(v * v, axis=1)
    s, lv = _codes_log_integrand(L, t, np.sum(u * v, axis=1), 1.0 - nu, 1.0 - nv)
    logw = lv - lpu - lpv
    if not np.any(s != 0):
        raise DegenerateProposalError("no sample landed in the support")
    c = _normalizer(n, region.m, t)
    pivot = np.max(logw[s != 0])
    vals = s * np.exp(np.where(s != 0, logw - pivot, -np.inf))
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(sample_count))
    scale = math.exp(pivot + c) if pivot + c < 700 else math.inf
    return {
        "estimate": SignedLogValue.from_float(mean) * SignedLogValue(1, pivot + c),
        "std_err": se * scale,
        "log_scale": pivot + c,
        "mean_scaled": mean,
        "std_err_scaled": se,
        "seed": seed,
    }


def h0_estimate(n: int, theta: float, theta_prime: float, region: CapAnnulusRegion, sample_count: int, seed: int = 0) -> dict:
    """Monte Carlo of H0 = E_t H(t) with t drawn from (1-t^2)^((n-3)/2), normalized weight."""
    setup = codes_setup(n, theta, theta_prime, region.m)
    rng = np.random.default_rng(seed)
    L = setup.lev
    ts = 2.0 * rng.beta((n - 1) / 2.0, (n - 1) / 2.0, size=sample_count) - 1.0
    u, lpu = _sample_region(region, L.alpha, sample_count, rng)
    v, lpv = _sample_region(region, L.alpha, sample_count, rng)
    nu = np.sum(u * u, axis=1)
    nv = np.sum(v * v, axis=1)
    den = np.sqrt((1.0 - nu) * (1.0 - nv))
    x = (ts - np.sum(u * v, axis=1)) / den
    inside = np.abs(x) < 1.0
    s, lw = weighted_lev_log(L, np.clip(x, -1, 1))
    lv = lw + L.alpha * np.log((1.0 - nu) * (1.0 - nv)) - lpu - lpv
    lv = lv + log_frame_constant(n, region.m) - 0.5 * (n - 3) * np.log1p(-ts * ts)
    s = np.where(inside, s, 0.0)
    pivot = np.max(lv[s != 0])
    vals = s * np.exp(np.where(s != 0, lv - pivot, -np.inf))
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(sample_count))
    return {"estimate": mean * math.exp(pivot), "std_err": se * math.exp(pivot), "seed": seed}


def codes_h_at_one(setup: CodesSetup, region: CapAnnulusRegion) -> SignedLogValue:
    """H(1) = g(1) times the relative mass of the region."""
    return g_at_one(setup.lev) * SignedLogValue(1, region.log_mass(setup.n))


def codes_h_zero(setup: CodesSetup, region: CapAnnulusRegion) -> SignedLogValue:
    """H0 = g0 times the squared relative mass."""
    return g_zero(setup.lev) * SignedLogValue(1, 2.0 * region.log_mass(setup.n))


def _tau_min(setup: CodesSetup, region: CapAnnulusRegion) -> float:
    """Smallest t at which some pair of region points has projected product above s'."""
    sp = setup.lev.s_prime
    c = 1.0 if region.m == 1 else math.cos(min(2.0 * region.eta, math.pi))
    lo, hi = region.r_lo, region.r_hi

    def tau(p):
        a, b = p
        return a * b * c + sp * math.sqrt(max((1 - a * a) * (1 - b * b), 0.0))

    grid = np.linspace(lo, hi, 201)
    A, B = np.meshgrid(grid, grid, indexing="ij")
    T = A * B * c + sp * np.sqrt((1 - A * A) * (1 - B * B))
    i = np.unravel_index(np.argmin(T), T.shape)
    best = float(T[i])
    res = minimize(tau, x0=[A[i], B[i]], bounds=[(lo, hi), (lo, hi)], method="L-BFGS-B")
    if res.success:
        best = min(best, float(res.fun))
    return best


def codes_forbidden_grid(setup: CodesSetup, region: CapAnnulusRegion, points: int = 16) -> tuple[np.ndarray, float]:
    """Grid on [t_safe, s]; below t_safe the integrand is pointwise nonpositive."""
    s = setup.geo.s
    t_safe = max(_tau_min(setup, region) - 1e-9, -1.0 + 1e-9)
    if t_safe >= s:
        return np.array([s]), t_safe
    k = np.arange(points + 1) / points
    return np.unique(s - (s - t_safe) * k**2), t_safe


def _h_codes(setup: CodesSetup, region: CapAnnulusRegion, t: float):
    if setup.m == 1:
        return _h_codes_m1(setup, region, t)
    if setup.m == 2:
        return _h_codes_m2(setup, region, t)
    raise ParameterDomainError("deterministic quadrature is available for m = 1, 2 only")


def verify_codes(n: int, theta: float, theta_prime: float, delta: float = 0.0, m: int = 1, eta: float | None = None, points: int = 16, setup: CodesSetup | None = None) -> CertificateReport:
    setup = setup or codes_setup(n, theta, theta_prime, m)
    if eta is None:
        eta = math.pi / 2 if m == 1 else 0.0
    region = setup.region(delta, eta)
    base_region = setup.region(0.0, eta)
    grid, t_safe = codes_forbidden_grid(setup, region, points)
    h_vals = []
    worst_ratio = -math.inf
    worst_t = None
    worst = SignedLogValue(0)
    for t in grid:
        val, absval = _h_codes(setup, region, float(t))
        h_vals.append(val)
        ratio = 0.0 if absval.sign == 0 or val.sign == 0 else val.sign * math.exp(val.log_mag - absval.log_mag)
        if ratio > worst_ratio:
            worst_ratio, worst_t, worst = ratio, float(t), val
    h1 = codes_h_at_one(setup, region)
    h0 = codes_h_zero(setup, region)
    psd, unresolved = resolved_minimum(*delsarte_coefficients(setup.lev, with_noise=True))
    feasible = worst_ratio <= FEASIBILITY_TOL and h0.sign > 0 and psd >= -FEASIBILITY_TOL
    bound = h1 / h0
    if m == 1:
        baseline = codes_h_at_one(setup, base_region) / codes_h_zero(setup, base_region)
    else:
        # compare against the plain m = 1 certificate so factors are comparable across m
        s1 = codes_setup(n, theta, theta_prime, 1)
        baseline = codes_h_at_one(s1, s1.region()) / codes_h_zero(s1, s1.region())
    lm = log_cap_mass_radius(n, setup.geo.r)
    from .levenshtein import m_lev

    classical = SignedLogValue(1, m_lev(n + 1, theta_prime).log_mag - log_cap_mass_radius(n, math.sqrt((math.cos(theta) - math.cos(theta_prime)) / (1 - math.cos(theta_prime)))))
    comparison = SignedLogValue(1, m_lev(n - m, setup.theta_eff).log_mag - lm)
    return CertificateReport(
        kind="codes",
        n=n,
        m=m,
        theta=theta,
        theta_prime=theta_prime,
        theta_eff=setup.theta_eff,
        delta=delta,
        eta=eta,
        grid=[float(t) for t in grid],
        h_values=h_vals,
        max_forbidden=worst,
        max_ratio=worst_ratio,
        h_at_one=h1,
        h_zero=h0,
        bound=bound,
        baseline=baseline,
        feasible=bool(feasible),
        marginal=abs(worst_ratio) < MARGINAL_TOL,
        psd_min_coeff=psd,
        violating_point=None if feasible else worst_t,
        extra={"psd_unresolved": unresolved, "t_safe": t_safe, "classical_baseline": classical, "cap_baseline": comparison, "r": setup.geo.r, "R": setup.geo.R_big},
    )


# packing

@dataclass(frozen=True)
class PackingSetup:
    n: int
    theta: float
    lev: LevPolynomial
    theta_eff: float

    @property
    def ell(self) -> float:
        return 1.0 / (2.0 * math.sin(self.theta_eff / 2.0))

    def spec(self, delta: float = 0.0) -> PackingKernelSpec:
        return PackingKernelSpec(self.n, self.theta_eff, self.ell, delta)


def packing_setup(n: int, theta: float) -> PackingSetup:
    if not (math.pi / 3 - 1e-15 <= theta <= math.pi / 2 + 1e-15):
        raise ParameterDomainError("packing needs pi/3 <= theta <= pi/2")
    if n < 4:
        raise ParameterDomainError("packing needs n >= 4")
    L = lev_polynomial(n, theta)
    return PackingSetup(n, theta, L, math.acos(L.s_prime))


def _log_sphere_area(k: int) -> float:
    """log |S^k| (k-dimensional unit sphere in R^{k+1})."""
    return math.log(2.0) + 0.5 * (k + 1) * math.log(math.pi) - float(gammaln((k + 1) / 2.0))


def _log_ball_volume(n: int, radius: float) -> float:
    return 0.5 * n * math.log(math.pi) - float(gammaln(n / 2.0 + 1.0)) + n * math.log(radius)


def h_packing(spec: PackingKernelSpec, T: float, lev: LevPolynomial | None = None) -> SignedLogValue:
    return _h_packing(spec, T, lev)[0]


def _h_packing(spec: PackingKernelSpec, T: float, lev: LevPolynomial | None = None, qs=(10, 16)):
    n = spec.n
    if T <= 0:
        raise ParameterDomainError("T must be positive")
    rho = spec.support_radius
    if T >= 2.0 * rho:
        return SignedLogValue(0), SignedLogValue(0)
    L = lev or lev_polynomial(n, spec.theta)
    lo = max(rho * math.exp(-LOG_CUTOFF / max(n - 2, 1)), T / 2.0 * 0.0)
    lo = max(lo, 0.0)

    def evaluate(q):
        br = _breaks(lo, rho, 1.0 / n, from_top=True)
        a, w = _gl_rule(br, q)
        A, B = np.meshgrid(a, a, indexing="ij")
        Wt = np.outer(w, w).ravel()
        A, B = A.ravel(), B.ravel()
        c = (A * A + B * B - T * T) / (2.0 * A * B)
        inside = np.abs(c) < 1.0
        s, lw = weighted_lev_log(L, np.clip(c, -1.0, 1.0), exponent=(n - 3) / 2.0)
        with np.errstate(divide="ignore"):
            logv = lw + (n - 2) * (np.log(A) + np.log(B) - math.log(T))
        return _sum_log(np.where(inside, s, 0.0), np.where(inside, logv, -np.inf), Wt)

    val, absval, _ = _converged(evaluate, qs)
    k = _log_sphere_area(n - 2)
    shift = lambda v: SignedLogValue(v.sign, v.log_mag + k) if v.sign else v
    return shift(val), shift(absval)


def verify_packing(n: int, theta: float, delta: float = 0.0, points: int = 8, setup: PackingSetup | None = None) -> CertificateReport:
    setup = setup or packing_setup(n, theta)
    spec = setup.spec(delta)
    ell = setup.ell
    # beyond T = 1 + delta/ell every cosine is at most s'
    top = 1.0 + delta / ell
    grid = np.unique(1.0 + (top - 1.0) * (np.arange(points + 1) / points) ** 2) if delta > 0 else np.array([1.0])
    h_vals = []
    worst_ratio, worst_t, worst = -math.inf, None, SignedLogValue(0)
    for T in grid:
        val, absval = _h_packing(spec, float(T), setup.lev)
        h_vals.append(val)
        ratio = 0.0 if absval.sign == 0 or val.sign == 0 else val.sign * math.exp(val.log_mag - absval.log_mag)
        if ratio > worst_ratio:
            worst_ratio, worst_t, worst = ratio, float(T), val
    L = setup.lev
    rho = spec.support_radius
    log_vol = _log_ball_volume(n, rho)
    h1 = g_at_one(L) * SignedLogValue(1, log_vol)
    h0 = g_zero(L) * SignedLogValue(1, 2.0 * log_vol)
    psd, unresolved = resolved_minimum(*delsarte_coefficients(L, with_noise=True))
    feasible = worst_ratio <= FEASIBILITY_TOL and h0.sign > 0 and psd >= -FEASIBILITY_TOL
    from .levenshtein import m_lev

    mlev = m_lev(n, setup.theta_eff)
    bound = SignedLogValue(1, mlev.log_mag - n * math.log(2.0 * rho))
    baseline = SignedLogValue(1, mlev.log_mag - n * math.log(2.0 * ell))
    classical = SignedLogValue(1, n * math.log(math.sin(theta / 2)) + m_lev(n, theta).log_mag)
    return CertificateReport(
        kind="packing",
        n=n,
        m=0,
        theta=theta,
        theta_prime=theta,
        theta_eff=setup.theta_eff,
        delta=delta,
        eta=0.0,
        grid=[float(T) for T in grid],
        h_values=h_vals,
        max_forbidden=worst,
        max_ratio=worst_ratio,
        h_at_one=h1,
        h_zero=h0,
        bound=bound,
        baseline=baseline,
        feasible=bool(feasible),
        marginal=abs(worst_ratio) < MARGINAL_TOL,
        psd_min_coeff=psd,
        violating_point=None if feasible else worst_t,
        extra={"psd_unresolved": unresolved, "ell": ell, "classical_baseline": classical},
    )


def verify_certificate(kind: str, **params) -> CertificateReport:
    if kind == "codes":
        return verify_codes(**params)
    if kind == "packing":
        return verify_packing(**params)
    raise ParameterDomainError(f"unknown certificate kind {kind!r}")


# positive definiteness

def psd_check(n: int, theta: float, theta_prime: float, delta: float, k_max: int = 12, nodes: int = 48, stricter: bool = False) -> float:
    """min_k of int H p_k w / (H(1) ||p_k||^2) for the m = 1 codes certificate.

    H is evaluated at Gauss-Jacobi nodes for (1-t^2)^((n-3)/2).
    """
    setup = codes_setup(n, theta, theta_prime, 1)
    region = setup.region(delta)
    a = (n - 3) / 2.0
    t, w = gauss_jacobi(nodes, a, a)
    sg = np.empty(nodes)
    lg = np.empty(nodes)
    for i, ti in enumerate(t):
        val, _ = _h_codes_m1(setup, region, float(ti), qs=(24, 32))
        sg[i], lg[i] = val.sign, val.log_mag if val.sign else -np.inf
    h1 = codes_h_at_one(setup, region).log_mag
    from .levenshtein import expansion_coefficients

    coeffs = expansion_coefficients(sg, lg, t, w, a, k_max, h1, scale_by_pk1=stricter)
    return float(np.min(coeffs))


def psd_coefficients(n: int, theta: float, theta_prime: float, delta: float, k_max: int = 12, nodes: int = 48) -> np.ndarray:
    setup = codes_setup(n, theta, theta_prime, 1)
    region = setup.region(delta)
    a = (n - 3) / 2.0
    t, w = gauss_jacobi(nodes, a, a)
    sg = np.empty(nodes)
    lg = np.empty(nodes)
    for i, ti in enumerate(t):
        val, _ = _h_codes_m1(setup, region, float(ti), qs=(24, 32))
        sg[i], lg[i] = val.sign, val.log_mag if val.sign else -np.inf
    from .levenshtein import expansion_coefficients

    return expansion_coefficients(sg, lg, t, w, a, k_max, codes_h_at_one(setup, region).log_mag, scale_by_pk1=False)


# asymptotic shapes

def asymptotic_density_codes(x: float, n: int, theta: float, theta_prime: float, delta: float) -> float:
    s, sp = math.cos(theta), math.cos(theta_prime)
    r = math.sqrt((s - sp) / (1.0 - sp))
    root = math.sqrt(max((s - x) / (1.0 - x), 0.0))
    pos = delta + root - r
    if pos <= 0:
        return 0.0
    return ((1.0 - x * x) / (x * x)) ** ((n - 4) / 2.0) * pos * math.exp(-2.0 * n * r * (root - r) / (s - r * r))


def asymptotic_density_packing(x: float, n: int, theta: float, delta: float) -> float:
    r = 1.0 / (2.0 * math.sin(theta / 2.0))
    rd = r + delta
    pos = rd - math.sqrt(max(1.0 - (1.0 - x * x) * rd * rd, 0.0)) - x * rd
    if pos <= 0:
        return 0.0
    root = math.sqrt(1.0 + (x - (1.0 - x * x) * r / math.sqrt(1.0 - (1.0 - x * x) * r * r)) ** 2)
    return math.exp((n - 4) / 2.0 * math.log1p(-x * x) - (n - 0.5) * math.log1p(-x)) * root * pos


# optimization

def _bisect(feasible_at, hi: float, iters: int = 14) -> float:
    lo = 0.0
    if not feasible_at(lo):
        raise RuntimeError("certificate infeasible at zero thickening")
    while feasible_at(hi):
        lo, hi = hi, 2.0 * hi
        if hi > 64:
            return lo
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if feasible_at(mid):
            lo = mid
        else:
            hi = mid
    return lo


def optimize_delta(kind: str, n: int, theta: float, theta_prime: float | None = None, m: int = 1, iters: int = 14) -> dict:
    """Largest feasible thickening found by bisection on the scaled parameter."""
    if kind == "packing":
        setup = packing_setup(n, theta)
        ell = setup.ell
        gam = _bisect(lambda g: verify_packing(n, theta, g * ell / n, setup=setup).feasible, 1.5, iters)
        rep = verify_packing(n, theta, gam * ell / n, setup=setup)
        return {
            "delta_star": gam * ell / n,
            "eta_star": 0.0,
            "scaled": gam,
            "bound": rep.bound,
            "baseline": rep.baseline,
            "improvement_factor": rep.improvement_factor,
            "report": rep,
        }
    if kind != "codes":
        raise ParameterDomainError(f"unknown kind {kind!r}")
    setup = codes_setup(n, theta, theta_prime, m)
    r, sp = setup.geo.r, setup.lev.s_prime
    unit = (1.0 - r * r) / r
    if m == 1:
        gam = _bisect(lambda g: verify_codes(n, theta, theta_prime, g * unit / n, setup=setup).feasible, 1.5, iters)
        rep = verify_codes(n, theta, theta_prime, gam * unit / n, setup=setup)
        return {
            "delta_star": gam * unit / n,
            "eta_star": math.pi / 2,
            "scaled": gam,
            "bound": rep.bound,
            "baseline": rep.baseline,
            "improvement_factor": rep.improvement_factor,
            "report": rep,
        }
    if m == 2:
        gamma = unit / 2.0
        delta = gamma / n
        k_adm = m2_admissible_kappa(r, sp, gamma)
        frac = _bisect(lambda f: verify_codes(n, theta, theta_prime, delta, 2, f * k_adm / math.sqrt(n), setup=setup).feasible, 1.5, iters)
        eta = frac * k_adm / math.sqrt(n)
        rep = verify_codes(n, theta, theta_prime, delta, 2, eta, setup=setup)
        return {
            "delta_star": delta,
            "eta_star": eta,
            "scaled": frac,
            "bound": rep.bound,
            "baseline": rep.baseline,
            "improvement_factor": rep.improvement_factor,
            "report": rep,
        }
    raise ParameterDomainError("optimizer supports m = 1, 2")


def m2_admissible_kappa(r: float, s_prime: float, gamma: float, m: int = 2) -> float:
    """kappa = eta sqrt(n) from eta^2 = (m+1)/(m-1) 2(1-s')/(n r) ((1-r^2)/r - gamma)."""
    val = (m + 1) / (m - 1) * 2.0 * (1.0 - s_prime) / r * ((1.0 - r * r) / r - gamma)
    if val <= 0:
        raise ParameterDomainError("gamma leaves no admissible angular width")
    return math.sqrt(val)
