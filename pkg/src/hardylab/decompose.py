"""Odd extensions, spherical-harmonic coefficients and vanishing of low-degree components.

Harmonic coefficients are computed only at n = 3 from an explicit real basis.
In every dimension the vanishing of low-degree components is also checked
through monomial moments of the odd extension. All sums that are expected to
cancel by mirror pairing use compensated summation, so on mirrored rules they
come out as exact zeros rather than rounding noise.
"""

from __future__ import annotations

import csv
import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import legendre as L
from scipy.interpolate import CubicSpline

from hardylab.cone import ConeSpec
from hardylab.errors import DomainError
from hardylab.quadrature import (
    QuadratureRule,
    cone_ball_rule,
    fsum,
    integrate,
    mirror_rule,
    radial_rule,
    sphere_rule,
)
from hardylab.trial import TrialFunction, even_extension, odd_extension

MAX_DEGREE = 12
DEFAULT_RADII = 32
VANISHING_FACTOR = 1e-10
NONSYMMETRIC_FACTOR = 1e-6


@dataclass(frozen=True)
class MultiIndex:
    alpha: tuple

    def __post_init__(self):
        a = tuple(int(v) for v in self.alpha)
        if any(v < 0 for v in a) or any(int(v) != v for v in self.alpha):
            raise DomainError(f"multi-index entries must be nonnegative integers, got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)

    @property
    def total_degree(self) -> int:
        return sum(self.alpha)

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.ones(x.shape[0])
        for j, e in enumerate(self.alpha):
            if e:
                out = out * x[:, j] ** e
        return out


def multi_indices(n: int, max_degree: int) -> list[MultiIndex]:
    """All multi-indices in n variables with |alpha| <= max_degree, graded."""
    out = []
    for d in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(n), d):
            a = [0] * n
            for i in combo:
                a[i] += 1
            out.append(MultiIndex(tuple(a)))
    return out


# ----------------------------------------------------------------------------
# real spherical harmonics on S^2


def _parity_polynomial(coefficients: np.ndarray):
    """Evaluate a polynomial of definite parity as z^p S(z^2) so z -> -z is an exact sign flip."""
    c = np.asarray(coefficients, dtype=float)
    nz = np.flatnonzero(np.abs(c) > 0)
    p = int(nz[0] % 2) if nz.size else 0
    s = c[p::2]

    def value(z):
        z = np.asarray(z, dtype=float)
        z2 = z * z
        acc = np.zeros_like(z)
        for coef in s[::-1]:
            acc = acc * z2 + coef
        return acc * z if p else acc

    return value


@dataclass(frozen=True, eq=False)
class SphericalHarmonic:
    """Real orthonormal harmonic of degree l; m > 0 is the cosine member, m < 0 the sine member.

    Written in Cartesian form N Q_l^{|m|}(z) Re/Im((x + i y)^{|m|}), which is
    the restriction of a homogeneous harmonic polynomial. Each member has a
    definite parity in every coordinate, and sign flips are exact.
    """

    l: int
    m: int
    normalization: float
    _q: Callable = field(repr=False)

    def __call__(self, sigma) -> np.ndarray:
        s = np.atleast_2d(np.asarray(sigma, dtype=float))
        x, y, z = s[:, 0], s[:, 1], s[:, 2]
        am = abs(self.m)
        c, d = np.ones_like(x), np.zeros_like(x)
        for _ in range(am):
            c, d = x * c - y * d, x * d + y * c
        ang = c if self.m >= 0 else d
        return self.normalization * self._q(z) * ang

    def parity(self) -> tuple[int, int, int]:
        """(+1/-1) parity in x, y, z."""
        am = abs(self.m)
        if self.m >= 0:
            px, py = (-1) ** am, 1
        else:
            px, py = (-1) ** (am + 1), -1
        return px, py, (-1) ** (self.l - am)

    @property
    def eigenvalue(self) -> int:
        return self.l * (self.l + 1)


def sphere_basis_n3(lmax: int) -> list[SphericalHarmonic]:
    """(lmax + 1)^2 real spherical harmonics ordered by (l, m), m = -l..l."""
    if int(lmax) != lmax or not 0 <= lmax <= MAX_DEGREE:
        raise DomainError(f"lmax must be an integer in 0..{MAX_DEGREE}, got {lmax!r}")
    basis = []
    for l in range(int(lmax) + 1):
        p_l = L.leg2poly(np.eye(l + 1)[l])
        for m in range(-l, l + 1):
            am = abs(m)
            q = np.polynomial.polynomial.polyder(p_l, am) if am else p_l
            norm = math.sqrt((2 * l + 1) / (4 * math.pi) * math.factorial(l - am) / math.factorial(l + am))
            if am:
                norm *= math.sqrt(2.0)
            basis.append(SphericalHarmonic(l, m, norm, _parity_polynomial(q)))
    return basis


def gram_matrix(basis: Sequence[SphericalHarmonic], rule: QuadratureRule) -> np.ndarray:
    Y = np.array([b(rule.nodes) for b in basis])
    return (Y * rule.weights) @ Y.T


def default_sphere_rule(order: int = 16) -> QuadratureRule:
    """Full-sphere rule mirrored across all three coordinate planes."""
    return sphere_rule(3, order)


def chebyshev_radii(R: float = 1.0, count: int = DEFAULT_RADII) -> np.ndarray:
    """Chebyshev-Lobatto radii R (1 - cos(j pi / N)) / 2, j = 1..N; excludes 0, includes R."""
    j = np.arange(1, count + 1)
    return R * 0.5 * (1.0 - np.cos(j * math.pi / count))


# ----------------------------------------------------------------------------
# coefficient extraction


def _extended(u: TrialFunction, extension: str) -> TrialFunction:
    if u.kind != "cone":
        return u
    return odd_extension(u) if extension == "odd" else even_extension(u)


def _fsum_rows(matrix: np.ndarray) -> np.ndarray:
    return np.array([math.fsum(row) for row in matrix])


@dataclass(frozen=True, eq=False)
class HarmonicCoefficients:
    """f_{l,m}(r_j) for every basis member and radius; ``values`` has shape (members, radii)."""

    lmax: int
    radii: np.ndarray
    members: tuple
    values: np.ndarray
    rule: dict
    extension: str = "odd"
    norm_sup: float = 0.0

    def degree_block(self, l: int) -> np.ndarray:
        rows = [i for i, (ll, _) in enumerate(self.members) if ll == l]
        return self.values[rows]

    def write_csv(self, stream) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["r", "l", "m", "value"])
        for (l, m), row in zip(self.members, self.values):
            for r, v in zip(self.radii, row):
                writer.writerow([repr(float(r)), l, m, repr(float(v))])

    def as_dict(self) -> dict:
        return {
            "lmax": self.lmax,
            "radii": [float(r) for r in self.radii],
            "members": [list(m) for m in self.members],
            "extension": self.extension,
            "rule": self.rule,
            "max_by_degree": {str(l): float(np.max(np.abs(self.degree_block(l)))) for l in range(self.lmax + 1)},
        }


def harmonic_coefficients(
    u: TrialFunction,
    lmax: int = 6,
    radii: Sequence[float] | None = None,
    rule: QuadratureRule | None = None,
    extension: str = "odd",
) -> HarmonicCoefficients:
    """f_{l,m}(r) = int_{S^2} u~(r sigma) Y_{l,m}(sigma) dsigma with u~ the odd (or even) extension."""
    if u.spec.n != 3:
        raise DomainError("harmonic coefficients are implemented for n = 3 only; use monomial moments")
    if rule is None:
        rule = default_sphere_rule()
    if rule.dim != 3:
        raise DomainError("sphere rule must live on S^2")
    if radii is None:
        radii = chebyshev_radii(u.R)
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise DomainError("radii must be positive and strictly increasing")
    ut = _extended(u, extension)
    basis = sphere_basis_n3(lmax)
    Y = np.array([b(rule.nodes) for b in basis])
    values = np.empty((len(basis), radii.size))
    sup = 0.0
    for j, r in enumerate(radii):
        wu = rule.weights * ut.evaluate(r * rule.nodes)
        sup = max(sup, float(np.max(np.abs(wu / rule.weights))))
        values[:, j] = _fsum_rows(Y * wu)
    return HarmonicCoefficients(
        lmax=int(lmax),
        radii=radii,
        members=tuple((b.l, b.m) for b in basis),
        values=values,
        rule=rule.describe(),
        extension=extension,
        norm_sup=sup,
    )


def reconstruct(coefficients: HarmonicCoefficients, point) -> np.ndarray | float:
    """Truncated series sum f_{l,m}(r) Y_{l,m}(sigma), f interpolated by cubic splines in r."""
    x = np.asarray(point, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    r = np.linalg.norm(x, axis=1)
    lo, hi = coefficients.radii[0], coefficients.radii[-1]
    if np.any(r < lo) or np.any(r > hi):
        raise DomainError(f"radius outside the sampled range [{lo:g}, {hi:g}]")
    sigma = x / r[:, None]
    basis = sphere_basis_n3(coefficients.lmax)
    spline = CubicSpline(coefficients.radii, coefficients.values, axis=1)
    f = spline(r)  # (members, points)
    Y = np.array([b(sigma) for b in basis])
    out = np.sum(f * Y, axis=0)
    return float(out[0]) if single else out


# ----------------------------------------------------------------------------
# vanishing of low degrees


@dataclass
class VanishingReport:
    spec: ConeSpec
    path: str
    max_coefficient: float
    threshold: float
    norm_sup: float
    passed: bool
    extension: str = "odd"
    by_degree: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    rule: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "n": self.spec.n,
            "k": self.spec.k,
            "path": self.path,
            "extension": self.extension,
            "max_coefficient": self.max_coefficient,
            "threshold": self.threshold,
            "norm_sup": self.norm_sup,
            "by_degree": self.by_degree,
            "passed": self.passed,
            "warnings": list(self.warnings),
            "rule": self.rule,
        }


def _threshold(rule: QuadratureRule, k: int, norm_sup: float, stochastic_band: float, notes: list) -> float:
    if rule.stochastic:
        return max(3.0 * stochastic_band, VANISHING_FACTOR * norm_sup)
    symmetric = rule.symmetric_last_k and rule.symmetric_k >= k
    if not symmetric:
        msg = "rule is not mirror-symmetric in the cone axes; threshold relaxed to quadrature tolerance"
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
        notes.append(msg)
        return NONSYMMETRIC_FACTOR * norm_sup
    return VANISHING_FACTOR * norm_sup


def low_degree_vanishing_check(
    u: TrialFunction,
    spec: ConeSpec | None = None,
    rule: QuadratureRule | None = None,
    radii: Sequence[float] | None = None,
    extension: str = "odd",
    seed: int = 0,
) -> VanishingReport:
    """Max |f_{l,m}(r)| over degrees l <= k - 1 (n = 3) or max monomial moment (n >= 4).

    Passes iff the maximum is below 1e-10 * sup|u~| on symmetric rules.
    ``extension="even"`` runs the negative control, which must fail.
    """
    spec = spec or u.spec
    notes: list = []
    if spec.n == 3:
        coeffs = harmonic_coefficients(u, max(spec.k - 1, 0), radii, rule, extension)
        used = rule or default_sphere_rule()
        by_degree = {str(l): float(np.max(np.abs(coeffs.degree_block(l)))) for l in range(spec.k)}
        worst = max(by_degree.values())
        threshold = _threshold(used, spec.k, coeffs.norm_sup, 0.0, notes)
        return VanishingReport(spec, "harmonic", worst, threshold, coeffs.norm_sup, worst <= threshold,
                               extension, by_degree, notes, used.describe())
    used = rule or mirror_rule(cone_ball_rule(spec, seed=seed, samples=2000), spec.k)
    ut = _extended(u, extension)
    values = ut.evaluate(used.nodes)
    norm_sup = float(np.max(np.abs(values)))
    by_degree: dict = {}
    band = 0.0
    for alpha in multi_indices(spec.n, spec.k - 1):
        density = values * alpha(used.nodes)
        m = abs(fsum(used.weights * density))
        if used.stochastic:
            band = max(band, integrate(used, density).stderr)
        key = str(alpha.total_degree)
        by_degree[key] = max(by_degree.get(key, 0.0), m)
    worst = max(by_degree.values())
    threshold = _threshold(used, spec.k, norm_sup, band, notes)
    return VanishingReport(spec, "moment", worst, threshold, norm_sup, worst <= threshold,
                           extension, by_degree, notes, used.describe())


def monomial_moment(
    u: TrialFunction,
    spec: ConeSpec,
    alpha,
    weight: Callable[[np.ndarray], np.ndarray] | None = None,
    rule: QuadratureRule | None = None,
    *,
    enforce_degree: bool = True,
    seed: int = 0,
) -> float:
    """int u~(x) w(|x|) x^alpha dx over a rule on R^n (default: the mirrored cone-ball rule).

    Vanishes whenever |alpha| <= k - 1. ``enforce_degree=False`` admits
    |alpha| >= k for negative controls.
    """
    a = alpha if isinstance(alpha, MultiIndex) else MultiIndex(tuple(alpha))
    if len(a.alpha) != spec.n:
        raise DomainError(f"multi-index has length {len(a.alpha)}, expected {spec.n}")
    if enforce_degree and a.total_degree >= spec.k:
        raise DomainError(f"|alpha| = {a.total_degree} >= k = {spec.k}: no forced cancellation")
    if rule is None:
        base = cone_ball_rule(spec, u.R) if spec.n == 3 else cone_ball_rule(spec, u.R, seed=seed, samples=2000)
        rule = mirror_rule(base, spec.k)
    ut = _extended(u, "odd")
    x = rule.nodes
    density = ut.evaluate(x) * a(x)
    if weight is not None:
        density = density * np.asarray(weight(np.linalg.norm(x, axis=1)), dtype=float)
    return fsum(rule.weights * density)


# ----------------------------------------------------------------------------
# energy doubling


@dataclass
class DoublingReport:
    spec: ConeSpec
    energy_ratio: float
    hardy_ratio: float
    target: int
    relative_errors: tuple
    tol: float
    status: str

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def as_dict(self) -> dict:
        return {
            "n": self.spec.n,
            "k": self.spec.k,
            "energy_ratio": self.energy_ratio,
            "hardy_ratio": self.hardy_ratio,
            "target": self.target,
            "relative_errors": list(self.relative_errors),
            "tol": self.tol,
            "status": self.status,
        }


def energy_doubling_check(
    u: TrialFunction,
    spec: ConeSpec | None = None,
    cone_rule: QuadratureRule | None = None,
    full_rule: QuadratureRule | None = None,
    tol: float = 1e-10,
) -> DoublingReport:
    """Ratios int_{R^n}|grad u~|^2 / int_cone |grad u|^2 and the same for u^2/|x|^2, against 2^k."""
    spec = spec or u.spec
    if cone_rule is None:
        cone_rule = cone_ball_rule(spec, u.R) if spec.n == 3 else cone_ball_rule(spec, u.R, seed=0)
    if full_rule is None:
        full_rule = mirror_rule(cone_rule, spec.k)
    ut = odd_extension(u) if u.kind == "cone" else u

    def pair(f):
        g_cone = f(u, cone_rule)
        g_full = f(ut, full_rule)
        return fsum(cone_rule.weights * g_cone), fsum(full_rule.weights * g_full)

    def grad_sq(v, rule):
        g = v.gradient(rule.nodes)
        return np.einsum("ij,ij->i", g, g)

    def hardy(v, rule):
        x = rule.nodes
        return v.evaluate(x) ** 2 / np.einsum("ij,ij->i", x, x)

    e_cone, e_full = pair(grad_sq)
    h_cone, h_full = pair(hardy)
    target = 2 ** spec.k
    if e_cone == 0.0 and h_cone == 0.0:
        return DoublingReport(spec, math.nan, math.nan, target, (math.nan, math.nan), tol, "degenerate")
    er, hr = e_full / e_cone, h_full / h_cone
    errs = (abs(er - target) / target, abs(hr - target) / target)
    status = "pass" if max(errs) <= tol else "fail"
    return DoublingReport(spec, er, hr, target, errs, tol, status)


# ----------------------------------------------------------------------------
# Parseval and the decomposed quotient


def parseval_defect(u: TrialFunction, r: float, lmax: int, rule: QuadratureRule | None = None) -> tuple[float, float]:
    """(sum_{l<=lmax,m} f_{l,m}(r)^2, int_{S^2} u~(r sigma)^2 dsigma) at one radius."""
    rule = rule or default_sphere_rule()
    coeffs = harmonic_coefficients(u, lmax, [r], rule)
    ut = _extended(u, "odd")
    total = fsum(rule.weights * ut.evaluate(r * rule.nodes) ** 2)
    return float(np.sum(coeffs.values[:, 0] ** 2)), total


def decomposed_quotient(
    u: TrialFunction,
    lmax: int,
    radial: QuadratureRule | None = None,
    rule: QuadratureRule | None = None,
) -> float:
    """Rayleigh quotient assembled from harmonic coefficients (n = 3).

    Energy sum_{l,m} int (f'_{l,m}^2 + l(l+1) f_{l,m}^2 / r^2) r^2 dr over
    sum_{l,m} int f_{l,m}^2 dr, where f' is the coefficient of the radial
    derivative of u~.
    """
    if u.spec.n != 3:
        raise DomainError("decomposed quotient is implemented for n = 3 only")
    radial = radial or radial_rule(u.R, 64, grading=1.0, panels=4)
    rule = rule or default_sphere_rule()
    ut = _extended(u, "odd")
    basis = sphere_basis_n3(lmax)
    Y = np.array([b(rule.nodes) for b in basis])
    eig = np.array([b.eigenvalue for b in basis], dtype=float)
    r = radial.nodes[:, 0]
    f = np.empty((len(basis), r.size))
    fp = np.empty_like(f)
    for j, rj in enumerate(r):
        x = rj * rule.nodes
        f[:, j] = Y @ (rule.weights * ut.evaluate(x))
        dr = np.einsum("ij,ij->i", ut.gradient(x), rule.nodes)
        fp[:, j] = Y @ (rule.weights * dr)
    energy = fsum(radial.weights * np.sum(fp ** 2 * r ** 2 + eig[:, None] * f ** 2, axis=0))
    hardy = fsum(radial.weights * np.sum(f ** 2, axis=0))
    return energy / hardy
