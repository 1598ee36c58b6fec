"""Command-line entry point: `lpbounds`."""

from __future__ import annotations

import csv
import io
import json
import math
import sys

import click

from . import __version__
from .bounds import GeometryInfeasibleError, asymptotic_factor, theta_star
from .certificate import (
    QuadratureError,
    codes_setup,
    m2_admissible_kappa,
    optimize_delta,
    packing_setup,
    verify_codes,
    verify_packing,
)
from .jacobi import ParameterDomainError, krasikov_violations
from .levenshtein import CertificateInvalidError, lev_polynomial, m_lev, quadrature_ratio

COLUMNS = [
    "n", "theta_deg", "theta_prime_deg", "m", "log2_baseline", "log2_bound",
    "factor", "delta_star", "eta_star", "feasible", "seed",
]
SCHEMA_VERSION = 1
DOMAIN_ERRORS = (ParameterDomainError, GeometryInfeasibleError, CertificateInvalidError, QuadratureError)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _resolve_theta_prime(kind: str, theta_deg: float, theta_prime: str | None) -> float:
    if kind == "packing":
        return theta_deg
    if theta_prime is None or theta_prime == "auto":
        ts = math.degrees(theta_star())
        if not theta_deg < ts:
            raise ParameterDomainError("theta-prime auto needs theta < theta*")
        return ts
    return float(theta_prime)


def _check_theta(theta_deg: float):
    if not 0.0 < theta_deg <= 90.0:
        raise ParameterDomainError(f"theta must lie in (0, 90] degrees, got {theta_deg}")


def compute_row(kind: str, n: int, theta_deg: float, theta_prime: str | None = None, m: int = 1,
                optimize: bool = False, gamma: float | None = None, kappa: float | None = None,
                seed: int = 0) -> dict:
    """One output row. gamma and kappa are in the scaled units used by the optimizer."""
    _check_theta(theta_deg)
    tp_deg = _resolve_theta_prime(kind, theta_deg, theta_prime)
    _check_theta(tp_deg)
    th, tp = math.radians(theta_deg), math.radians(tp_deg)
    delta, eta = 0.0, 0.0
    if kind == "packing":
        if optimize:
            res = optimize_delta("packing", n, th)
            rep, delta = res["report"], res["delta_star"]
        else:
            setup = packing_setup(n, th)
            delta = (gamma or 0.0) * setup.ell / n
            rep = verify_packing(n, th, delta, setup=setup)
    elif kind == "codes":
        if optimize:
            res = optimize_delta("codes", n, th, tp, m=m)
            rep, delta, eta = res["report"], res["delta_star"], res["eta_star"]
        else:
            setup = codes_setup(n, th, tp, m)
            r, sp = setup.geo.r, setup.lev.s_prime
            unit = (1.0 - r * r) / r
            g = gamma or 0.0
            delta = g * unit / n
            if m == 1:
                eta = math.pi / 2
            elif kappa is not None:
                eta = kappa / math.sqrt(n)
            elif g > 0:
                eta = m2_admissible_kappa(r, sp, g * unit) / math.sqrt(n)
            rep = verify_codes(n, th, tp, delta, m, eta, setup=setup)
    else:
        raise ParameterDomainError(f"unknown kind {kind!r}")
    return {
        "n": n,
        "theta_deg": float(theta_deg),
        "theta_prime_deg": float(tp_deg),
        "m": m if kind == "codes" else 0,
        "log2_baseline": rep.baseline.log2(),
        "log2_bound": rep.bound.log2(),
        "factor": rep.improvement_factor,
        "delta_star": float(delta),
        "eta_star": float(eta),
        "feasible": bool(rep.feasible),
        "seed": seed,
    }


def render(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps([{k: r[k] for k in COLUMNS} for r in rows], indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[k]) for k in COLUMNS])
    return buf.getvalue()


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def _fail(exc: Exception):
    click.echo(f"error: {exc}", err=True)
    sys.exit(2)


@click.group()
@click.version_option(__version__)
def main():
    """Linear programming bounds for spherical codes and sphere packings."""


@main.command("theta-star")
@click.option("--radians", is_flag=True, help="Print radians only.")
def cmd_theta_star(radians):
    ts = theta_star()
    if radians:
        click.echo(f"{ts:.17g}")
    else:
        click.echo(f"{math.degrees(ts):.17g} deg  {ts:.17g} rad")


def _bound_options(f):
    f = click.option("--n", "n", type=int, required=True)(f)
    f = click.option("--theta", type=float, required=True, help="Degrees.")(f)
    f = click.option("--theta-prime", default=None, help="Degrees or 'auto' (codes only).")(f)
    f = click.option("--m", type=int, default=1, show_default=True)(f)
    f = click.option("--gamma", type=float, default=None, help="Scaled thickening (units of r/n or (1-r^2)/(rn)).")(f)
    f = click.option("--kappa", type=float, default=None, help="eta * sqrt(n) for m = 2.")(f)
    f = click.option("--seed", type=int, default=0, show_default=True)(f)
    f = click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)(f)
    f = click.option("--out", type=click.Path(dir_okay=False), default=None)(f)
    return f


@main.command("bound")
@click.argument("kind", type=click.Choice(["codes", "packing"]))
@_bound_options
@click.option("--optimize", is_flag=True, help="Search for the largest feasible thickening.")
def cmd_bound(kind, n, theta, theta_prime, m, gamma, kappa, seed, fmt, out, optimize):
    try:
        row = compute_row(kind, n, theta, theta_prime, m, optimize, gamma, kappa, seed)
    except DOMAIN_ERRORS as exc:
        _fail(exc)
    _emit(render([row], fmt), out)


@main.command("optimize")
@click.argument("kind", type=click.Choice(["codes", "packing"]))
@_bound_options
def cmd_optimize(kind, n, theta, theta_prime, m, gamma, kappa, seed, fmt, out):
    try:
        row = compute_row(kind, n, theta, theta_prime, m, True, gamma, kappa, seed)
    except DOMAIN_ERRORS as exc:
        _fail(exc)
    _emit(render([row], fmt), out)


@main.command("table")
@click.argument("kind", type=click.Choice(["codes", "packing"]))
@click.option("--n-list", required=True, help="Comma separated dimensions.")
@click.option("--theta", type=float, required=True)
@click.option("--theta-prime", default=None)
@click.option("--m", type=int, default=1, show_default=True)
@click.option("--optimize/--no-optimize", default=True, show_default=True)
@click.option("--gamma", type=float, default=None)
@click.option("--kappa", type=float, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def cmd_table(kind, n_list, theta, theta_prime, m, optimize, gamma, kappa, seed, fmt, out):
    try:
        ns = [int(v) for v in n_list.split(",") if v.strip()]
        rows = [compute_row(kind, n, theta, theta_prime, m, optimize, gamma, kappa, seed) for n in ns]
    except (ValueError,) + DOMAIN_ERRORS as exc:
        _fail(exc)
    _emit(render(rows, fmt), out)


@main.command("factors")
@click.option("--theta-prime", default="auto", show_default=True)
@click.option("--m-list", default="1,2,3,4", show_default=True)
@click.option("--n", "n", type=int, default=None, help="Needed for m >= 5.")
def cmd_factors(theta_prime, m_list, n):
    try:
        tp = theta_star() if theta_prime == "auto" else math.radians(float(theta_prime))
        click.echo("m,analytic_factor,geometric_average")
        for m in (int(v) for v in m_list.split(",")):
            rep = asymptotic_factor(m, tp, n)
            click.echo(f"{m},{rep.analytic_factor:.17g},{rep.geometric_average:.17g}")
    except (ValueError,) + DOMAIN_ERRORS as exc:
        _fail(exc)


@main.command("validate")
@click.argument("which", type=click.Choice(["density", "invariance", "krasikov", "mlev-identity"]))
@click.option("--n", "n", type=int, default=10)
@click.option("--m", type=int, default=2)
@click.option("--t", type=float, default=0.3)
@click.option("--theta", type=float, default=60.0)
@click.option("--d", type=int, default=40)
@click.option("--alpha", type=float, default=60.0)
@click.option("--samples", type=int, default=1000000)
@click.option("--bins", type=int, default=20)
@click.option("--seed", type=int, default=0)
@click.option("--tol", type=float, default=None, help="p-value floor or relative tolerance.")
def cmd_validate(which, n, m, t, theta, d, alpha, samples, bins, seed, tol):
    from . import stiefel

    try:
        if which == "density":
            tol = 1e-3 if tol is None else tol
            rep = stiefel.density_validation(n, m, t, bins, samples, seed=seed)
            ok = rep["p_value"] > tol and rep["outside_support"] == 0
            stat = f"chi2={rep['chi2']:.6g} dof={rep['dof']} p={rep['p_value']:.6g} pooled={rep['pooled_cells']}"
        elif which == "invariance":
            tol = 1e-3 if tol is None else tol
            rep = stiefel.two_sample_invariance(n, samples, seed=seed)
            ok = rep["p_value"] > tol
            stat = f"ks={rep['statistic']:.6g} p={rep['p_value']:.6g}"
        elif which == "krasikov":
            bad, excess = krasikov_violations(d, alpha)
            ok = bad == 0
            stat = f"violations={bad} max_excess={excess:.6g}"
        else:
            tol = 1e-8 if tol is None else tol
            th = math.radians(theta)
            L = lev_polynomial(n, th)
            quad = quadrature_ratio(L)
            rel = abs(math.expm1(quad.log_mag - m_lev(n, th).log_mag))
            ok = rel <= tol
            stat = f"relative_error={rel:.6g}"
    except (ValueError,) + DOMAIN_ERRORS as exc:
        _fail(exc)
    click.echo(f"{which}: {'pass' if ok else 'FAIL'} {stat} seed={seed}")
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
