"""Integral functionals of trial functions and inequality verdicts.

Every n-dimensional functional is a quadrature sum over a rule; reduced
(one-dimensional) functionals of a radial profile f are evaluated in the
log-radius variable t = ln r through h = r^{(n-2)/2} f:

    int f'^2 r^{n-1} dr = int (h' - gamma h)^2 dt,
    int f^2 r^{n-3} dr  = int h^2 dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from hardylab.cone import ConeSpec, as_half_integer, hardy_constant, iterated_logs, weighted_halfspace_constant
from hardylab.errors import DegenerateTrialError, DomainError, EvaluationError
from hardylab.quadrature import (
    Estimate,
    QuadratureRule,
    integrate,
    integrate_log_radial,
    rounding_error_estimate,
)
from hardylab.trial import RadialProfile, TrialFunction

HOLDS, VIOLATED, INCONCLUSIVE = "holds", "violated", "inconclusive"
DEFAULT_FT_DEPTH = 6
UNDERFLOW_CLAMP = 1e-300


@dataclass
class FunctionalReport:
    energy: float
    hardy: float
    constant_used: float
    margin: float
    tolerance: float
    verdict: str
    weighted: float | None = None
    remainder_terms: list[float] | None = None
    margins_by_depth: list[float] | None = None
    error_estimate: float = 0.0
    stderr: dict = field(default_factory=dict)
    check: str = ""
    context: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS

    def as_dict(self) -> dict:
        return {
            "check": self.check,
            "energy": self.energy,
            "hardy": self.hardy,
            "weighted": self.weighted,
            "remainder_terms": self.remainder_terms,
            "constant_used": self.constant_used,
            "margin": self.margin,
            "margins_by_depth": self.margins_by_depth,
            "tolerance": self.tolerance,
            "error_estimate": self.error_estimate,
            "stderr": dict(self.stderr),
            "verdict": self.verdict,
            "context": dict(self.context),
        }


def verdict_for(margin: float, tolerance: float, error_estimate: float) -> str:
    """violated below -tolerance, inconclusive inside the error band, else holds."""
    if margin < -tolerance:
        return VIOLATED
    if abs(margin) < error_estimate:
        return INCONCLUSIVE
    return HOLDS


# ----------------------------------------------------------------------------
# node data and integrands


def _radii(rule: QuadratureRule) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->i", rule.nodes, rule.nodes))


def _grad_sq(u: TrialFunction, rule: QuadratureRule) -> np.ndarray:
    g = u.gradient(rule.nodes)
    return np.einsum("ij,ij->i", g, g)


def _hardy_density(u: TrialFunction, rule: QuadratureRule) -> np.ndarray:
    r = _radii(rule)
    return u.evaluate(rule.nodes) ** 2 / r ** 2


def _singular_density(u: TrialFunction, rule: QuadratureRule, axis: int) -> np.ndarray:
    xj = rule.nodes[:, axis]
    values = u.evaluate(rule.nodes)
    with np.errstate(divide="ignore", invalid="ignore"):
        density = np.where(values == 0.0, 0.0, values ** 2 / xj ** 2)
    return density


def _ft_weights(rule: QuadratureRule, R: float, depth: int) -> np.ndarray:
    r = _radii(rule)
    if np.any(r > R * (1 + 1e-12)):
        i = int(np.flatnonzero(r > R * (1 + 1e-12))[0])
        raise DomainError(f"node {i} has |x| = {r[i]!r} > R = {R!r}")
    s = np.minimum(r / R, 1.0)
    X = iterated_logs(depth, s=s)
    products = np.cumprod(X ** 2, axis=0)
    products[products < UNDERFLOW_CLAMP] = 0.0
    return products


def dirichlet_energy(u: TrialFunction, rule: QuadratureRule) -> float:
    """int |grad u|^2 dx."""
    return integrate(rule, _grad_sq(u, rule)).value


def hardy_term(u: TrialFunction, rule: QuadratureRule) -> float:
    """int u^2 / |x|^2 dx."""
    return integrate(rule, _hardy_density(u, rule)).value


def singular_weight_term(u: TrialFunction, rule: QuadratureRule, axis: int | None = None) -> float:
    """int u^2 / x_j^2 dx along coordinate ``axis`` (default: the last one)."""
    axis = rule.dim - 1 if axis is None else axis
    return integrate(rule, _singular_density(u, rule, axis)).value


def ft_remainder_terms(u: TrialFunction, rule: QuadratureRule, R: float, depth: int = DEFAULT_FT_DEPTH) -> list[float]:
    """(1/4) int u^2/|x|^2 X_1^2(|x|/R) ... X_i^2(|x|/R) dx for i = 1..depth."""
    base = _hardy_density(u, rule)
    products = _ft_weights(rule, R, depth)
    return [0.25 * integrate(rule, base * p).value for p in products]


def rayleigh_quotient(u: TrialFunction, rule: QuadratureRule) -> float:
    """Dirichlet energy divided by the Hardy term."""
    h = hardy_term(u, rule)
    if not h > 0.0:
        raise DegenerateTrialError("Hardy term vanishes; quotient undefined")
    return dirichlet_energy(u, rule) / h


# ----------------------------------------------------------------------------
# reduced radial functionals


def _profile_rule(f: RadialProfile, rule):
    rule = f.default_rule() if rule is None else rule
    if rule.log_nodes is None:
        raise DomainError("reduced functionals need a radial rule with a log-radius form")
    return rule


def reduced_integrals(n: int, f: RadialProfile, rule: QuadratureRule | None = None) -> tuple[float, float, float]:
    """(int f'^2 r^{n-1} dr, int f^2 r^{n-3} dr, rule) in log-radius form."""
    rule = _profile_rule(f, rule)
    gamma = (n - 2) / 2
    h, hdot = f.scaled(rule.log_nodes, gamma)
    kinetic = integrate_log_radial(rule, (hdot - gamma * h) ** 2)
    potential = integrate_log_radial(rule, h * h)
    return kinetic, potential, rule


def reduced_radial_quotient(spec: ConeSpec, f: RadialProfile, angular_eigenvalue: float,
                            rule: QuadratureRule | None = None) -> float:
    """[int (f'^2 + c f^2/r^2) r^{n-1} dr] / [int f^2 r^{n-3} dr]."""
    if angular_eigenvalue < 0:
        raise DomainError("angular eigenvalue must be nonnegative")
    kinetic, potential, _ = reduced_integrals(spec.n, f, rule)
    if not potential > 0.0:
        raise DegenerateTrialError("reduced Hardy term vanishes")
    return (kinetic + angular_eigenvalue * potential) / potential


def reduced_ft_terms(n: int, f: RadialProfile, R: float, depth: int = DEFAULT_FT_DEPTH,
                     rule: QuadratureRule | None = None) -> list[float]:
    """(1/4) int f^2 r^{n-3} X_1^2 ... X_i^2 (r/R) dr for i = 1..depth."""
    rule = _profile_rule(f, rule)
    gamma = (n - 2) / 2
    h, _ = f.scaled(rule.log_nodes, gamma)
    log_s = rule.log_nodes - math.log(R)
    if np.any(log_s > 1e-12):
        raise DomainError("profile rule extends beyond R")
    X = iterated_logs(depth, log_s=np.minimum(log_s, 0.0))
    products = np.cumprod(X ** 2, axis=0)
    products[products < UNDERFLOW_CLAMP] = 0.0
    return [0.25 * integrate_log_radial(rule, h * h * p) for p in products]


# ----------------------------------------------------------------------------
# checks


def _default_tolerance(error_estimate: float, stochastic: bool) -> float:
    if stochastic:
        return max(1e-8, error_estimate)
    return max(1e-8, 1e3 * error_estimate)


def _margin_stats(rule: QuadratureRule, density: np.ndarray) -> tuple[float, float]:
    """(error estimate, 3-sigma band) of a margin integrand."""
    if rule.stochastic:
        sigma = integrate(rule, density).stderr
        return sigma, 3.0 * sigma
    err = rounding_error_estimate(rule, density)
    return err, err


def check_hardy(spec: ConeSpec, u: TrialFunction, rule: QuadratureRule, tol: float | None = None) -> FunctionalReport:
    """margin = energy - C * hardy with C = (n - 2 + 2k)^2 / 4."""
    return _check_weighted(
        spec.n, u, rule, tol,
        constant=hardy_constant(spec), coefficient=Fraction(0),
        check="hardy", context={"spec": spec.as_dict()},
    )


def check_weighted_hardy(n: int, l, u: TrialFunction, rule: QuadratureRule, tol: float | None = None) -> FunctionalReport:
    """margin = energy + l(l-1) int u^2/x_n^2 - (n + 2l - 2)^2/4 * hardy (half-space)."""
    constant = weighted_halfspace_constant(n, l)
    lv = as_half_integer(l)
    return _check_weighted(
        n, u, rule, tol,
        constant=constant, coefficient=lv * (lv - 1),
        check="weighted_hardy", context={"n": n, "l": str(lv)},
    )


def _check_weighted(n, u, rule, tol, *, constant, coefficient, check, context) -> FunctionalReport:
    grad_sq = _grad_sq(u, rule)
    hardy_d = _hardy_density(u, rule)
    energy = integrate(rule, grad_sq)
    hardy = integrate(rule, hardy_d)
    c_float = float(constant)
    coef = float(coefficient)
    density = grad_sq - c_float * hardy_d
    weighted = None
    margin = energy.value
    if coefficient != 0:
        singular_d = _singular_density(u, rule, n - 1)
        if np.any(~np.isfinite(singular_d)):
            raise EvaluationError("u^2/x_n^2 is not finite at some node: trial is inadmissible")
        w_est = integrate(rule, singular_d)
        weighted = w_est.value
        margin = margin + coef * weighted
        density = density + coef * singular_d
    margin = margin - c_float * hardy.value
    err, band = _margin_stats(rule, density)
    tolerance = _default_tolerance(band, rule.stochastic) if tol is None else max(tol, band if rule.stochastic else 0.0)
    return FunctionalReport(
        energy=energy.value,
        hardy=hardy.value,
        weighted=weighted,
        constant_used=c_float,
        margin=margin,
        tolerance=tolerance,
        verdict=verdict_for(margin, tolerance, err),
        error_estimate=err,
        stderr={"energy": energy.stderr, "hardy": hardy.stderr, "margin": err if rule.stochastic else 0.0},
        check=check,
        context={**context, "coefficient": str(coefficient), "rule": rule.describe(),
                 "trial": u.descriptor},
    )


def check_ft(spec: ConeSpec, u: TrialFunction, rule: QuadratureRule, R: float,
             depth: int = DEFAULT_FT_DEPTH, tol: float | None = None) -> FunctionalReport:
    """Hardy inequality improved by the iterated-log remainder series, truncated at each depth.

    ``margins_by_depth[m-1] = energy - C*hardy - sum_{i<=m} term_i``; the
    verdict requires every truncation to hold.
    """
    grad_sq = _grad_sq(u, rule)
    hardy_d = _hardy_density(u, rule)
    products = _ft_weights(rule, R, depth)
    energy = integrate(rule, grad_sq)
    hardy = integrate(rule, hardy_d)
    c_float = float(hardy_constant(spec))
    term_densities = [0.25 * hardy_d * p for p in products]
    terms = [integrate(rule, d).value for d in term_densities]

    margins, errs, bands = [], [], []
    base = energy.value - c_float * hardy.value
    density = grad_sq - c_float * hardy_d
    running = 0.0
    for term, d in zip(terms, term_densities):
        running += term
        density = density - d
        margins.append(base - running)
        e, b = _margin_stats(rule, density)
        errs.append(e)
        bands.append(b)
    err, band = max(errs), max(bands)
    tolerance = _default_tolerance(band, rule.stochastic) if tol is None else max(tol, band if rule.stochastic else 0.0)
    worst = min(margins)
    verdicts = [verdict_for(m, tolerance, e) for m, e in zip(margins, errs)]
    if VIOLATED in verdicts:
        verdict = VIOLATED
    elif INCONCLUSIVE in verdicts:
        verdict = INCONCLUSIVE
    else:
        verdict = HOLDS
    return FunctionalReport(
        energy=energy.value,
        hardy=hardy.value,
        remainder_terms=terms,
        margins_by_depth=margins,
        constant_used=c_float,
        margin=worst,
        tolerance=tolerance,
        verdict=verdict,
        error_estimate=err,
        stderr={"energy": energy.stderr, "hardy": hardy.stderr},
        check="ft",
        context={"spec": spec.as_dict(), "R": R, "depth": depth, "rule": rule.describe(),
                 "trial": u.descriptor},
    )


def check_ft_radial(n: int, f: RadialProfile, R: float, depth: int = DEFAULT_FT_DEPTH,
                    angular_eigenvalue: float = 0.0, constant: float | None = None,
                    rule: QuadratureRule | None = None, tol: float | None = None) -> FunctionalReport:
    """One-dimensional remainder inequality for a radial profile.

    With the defaults (c = 0, constant (n-2)^2/4) this is the base radial
    inequality the cone result reduces to.
    """
    rule = _profile_rule(f, rule)
    kinetic, potential, _ = reduced_integrals(n, f, rule)
    constant = (n - 2) ** 2 / 4 if constant is None else float(constant)
    energy = kinetic + angular_eigenvalue * potential
    terms = reduced_ft_terms(n, f, R, depth, rule)
    base = energy - constant * potential
    margins = list(base - np.cumsum(terms))
    err = 64 * np.finfo(float).eps * (abs(energy) + constant * abs(potential))
    tolerance = max(1e-8, 1e3 * err) if tol is None else tol
    verdicts = [verdict_for(m, tolerance, err) for m in margins]
    verdict = VIOLATED if VIOLATED in verdicts else (INCONCLUSIVE if INCONCLUSIVE in verdicts else HOLDS)
    return FunctionalReport(
        energy=energy, hardy=potential, remainder_terms=list(terms),
        margins_by_depth=[float(m) for m in margins], constant_used=constant,
        margin=float(min(margins)), tolerance=tolerance, verdict=verdict, error_estimate=err,
        check="ft_radial",
        context={"n": n, "R": R, "depth": depth, "angular_eigenvalue": angular_eigenvalue,
                 "profile": f.descriptor, "rule": rule.describe()},
    )


def hardy_estimate(u: TrialFunction, rule: QuadratureRule) -> Estimate:
    return integrate(rule, _hardy_density(u, rule))


def energy_estimate(u: TrialFunction, rule: QuadratureRule) -> Estimate:
    return integrate(rule, _grad_sq(u, rule))
