"""Finite-difference witnesses for the conjugation identities and the spherical Laplacian.

Everything here is built on one centered 3-point stencil per axis. Steps are
scaled per point by ``min(1, dist) / 4`` where ``dist`` is the distance to the
nearest singular hyperplane, so stencils stay inside the domain.
"""

from __future__ import annotations

import csv
import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from hardylab.cone import ConeSpec, angular_eigenfunction, principal_eigenvalue
from hardylab.errors import DomainError

Field = Callable[[np.ndarray], np.ndarray]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class ResidualSample:
    """Residual of an identity at one point, with its dyadic step sweep.

    ``h`` is the nominal step of the first entry of ``steps``; ``residual`` the
    residual there. ``order_estimate`` is NaN unless at least three residuals
    sit above the rounding floor.
    """

    point: tuple
    h: float
    residual: float
    order_estimate: float
    steps: tuple = ()
    residuals: tuple = ()
    effective_steps: tuple = ()
    label: str = ""
    cross_residuals: tuple = ()
    cross_order: float = float("nan")
    discrete_exact: bool = False

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "point": list(self.point),
            "h": self.h,
            "residual": self.residual,
            "order_estimate": None if math.isnan(self.order_estimate) else self.order_estimate,
            "steps": list(self.steps),
            "residuals": list(self.residuals),
            "cross_residuals": list(self.cross_residuals),
            "cross_order": None if math.isnan(self.cross_order) else self.cross_order,
            "discrete_exact": self.discrete_exact,
        }


# ----------------------------------------------------------------------------
# stencils


def _point(point) -> np.ndarray:
    x = np.asarray(point, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise DomainError("point must have finite coordinates")
    return x


def _stencil_values(f: Field, x: np.ndarray, h: float) -> tuple[float, np.ndarray, np.ndarray]:
    """f at x, x + h e_j and x - h e_j, evaluated in one batched call."""
    n = x.size
    shifts = np.vstack([np.zeros(n), h * np.eye(n), -h * np.eye(n)])
    vals = np.asarray(f(x[None, :] + shifts), dtype=float).ravel()
    if vals.size != 2 * n + 1 or not np.all(np.isfinite(vals)):
        raise DomainError("field is not finite on the stencil")
    return vals[0], vals[1:n + 1], vals[n + 1:]


def second_differences(f: Field, point, h: float) -> np.ndarray:
    """Per-axis centered second differences (f(x+h e_j) - 2f(x) + f(x-h e_j)) / h^2."""
    x = _point(point)
    c, p, m = _stencil_values(f, x, h)
    return (p - 2.0 * c + m) / (h * h)


def stencil_laplacian(f: Field, point, h: float) -> float:
    return math.fsum(second_differences(f, point, h))


def _derivatives(f: Field, x: np.ndarray, h: float) -> tuple[float, np.ndarray, np.ndarray]:
    c, p, m = _stencil_values(f, x, h)
    return c, (p - 2.0 * c + m) / (h * h), (p - m) / (2.0 * h)


def fit_order(steps: Sequence[float], residuals: Sequence[float], floors: Sequence[float] | None = None) -> float:
    """Least-squares slope of log residual against log step.

    Residuals at or below 100x their rounding floor are dropped; fewer than
    three survivors give NaN.
    """
    h = np.asarray(steps, dtype=float)
    r = np.asarray(residuals, dtype=float)
    keep = r > 0
    if floors is not None:
        keep &= r > 100.0 * np.asarray(floors, dtype=float)
    if keep.sum() < 3:
        return float("nan")
    slope, _ = np.polyfit(np.log(h[keep]), np.log(r[keep]), 1)
    return float(slope)


def _effective_step(h: float, dist: float) -> float:
    if not h > 0:
        raise DomainError(f"step must be positive, got {h!r}")
    if not dist > 0:
        raise DomainError("point lies on or outside the singular boundary")
    h_eff = h * min(1.0, dist) / 4.0
    if h_eff >= dist:
        raise DomainError(f"stencil of width {h_eff:g} crosses the boundary at distance {dist:g}")
    return h_eff


def _sweep(sides: Callable[[float], tuple[float, float, float]], dist: float, x, h, levels, label) -> ResidualSample:
    """Evaluate (lhs, rhs, scale) along h, h/2, ... and fit orders.

    The same-step residual is |lhs(h) - rhs(h)|. The cross-step residual
    |lhs(h) - rhs(h/2)| does not rely on any cancellation between the two
    stencils, so it converges at the truncation rate even where the discrete
    identity happens to be exact.
    """
    steps = tuple(h / 2 ** i for i in range(levels + 1))
    effective = tuple(_effective_step(s, dist) for s in steps)
    vals = [sides(e) for e in effective]
    floors = [4.0 * x.size * _EPS * v[2] / (e * e) for v, e in zip(vals, effective)]
    residuals = tuple(abs(v[0] - v[1]) for v in vals[:levels])
    cross = tuple(abs(vals[i][0] - vals[i + 1][1]) for i in range(levels))
    order = fit_order(effective[:levels], residuals, floors[:levels])
    exact = all(r <= 100.0 * f for r, f in zip(residuals, floors))
    return ResidualSample(
        point=tuple(float(v) for v in x),
        h=float(h),
        residual=residuals[0],
        order_estimate=order,
        steps=steps[:levels],
        residuals=residuals,
        effective_steps=effective[:levels],
        label=label,
        cross_residuals=cross,
        cross_order=fit_order(effective[:levels], cross, floors[1:]),
        discrete_exact=exact,
    )


# ----------------------------------------------------------------------------
# identities


def conjugation_identity_residual(g: Field, l, point, h: float = 0.1, levels: int = 3) -> ResidualSample:
    """Residual of x_n^{-l}(-Laplace + l(l-1)/x_n^2)(x_n^l g) = -(Laplace g + (2l/x_n) d_n g).

    Both sides use centered differences at step h min(1, x_n)/4, repeated at
    h/2, h/4, ... for the order estimate. ``l`` may be any real number.
    For l in {0, 1} the stencils satisfy the identity exactly, so the
    residual stays at the rounding floor.
    """
    x = _point(point)
    lv = float(l)
    xn = x[-1]
    w = lambda y: y[:, -1] ** lv * np.asarray(g(y), dtype=float)  # noqa: E731

    def sides(h_eff):
        wc, wdd, _ = _derivatives(w, x, h_eff)
        gc, gdd, gd = _derivatives(g, x, h_eff)
        lhs = xn ** (-lv) * (-math.fsum(wdd) + lv * (lv - 1.0) / (xn * xn) * wc)
        rhs = -(math.fsum(gdd) + (2.0 * lv / xn) * gd[-1])
        return lhs, rhs, max(abs(wc) * xn ** (-lv), abs(gc), 1.0)

    return _sweep(sides, xn, x, h, levels, f"conjugation(l={l})")


def product_identity_residual(g: Field, spec: ConeSpec, point, h: float = 0.1, levels: int = 3) -> ResidualSample:
    """Residual of the product identity with weight prod_{i in cone axes} x_i.

    LHS: -(prod x_i)^{-1} Laplace(prod x_i g). RHS: the free second
    derivatives plus (d_j^2 + (2/x_j) d_j) g on every cone axis. The weight
    is linear in each variable, so same-step residuals sit at rounding level
    and the cross-step residual carries the convergence order.
    """
    x = _point(point)
    if x.size != spec.n:
        raise DomainError(f"point has dimension {x.size}, expected {spec.n}")
    n, k = spec.n, spec.k
    tail = slice(n - k, n)
    weight = float(np.prod(x[tail]))
    w = lambda y: np.prod(y[:, tail], axis=1) * np.asarray(g(y), dtype=float)  # noqa: E731

    def sides(h_eff):
        wc, wdd, _ = _derivatives(w, x, h_eff)
        gc, gdd, gd = _derivatives(g, x, h_eff)
        lhs = -math.fsum(wdd) / weight
        rhs = -(math.fsum(gdd[: n - k]) + math.fsum(gdd[tail] + 2.0 / x[tail] * gd[tail]))
        return lhs, rhs, max(abs(wc) / weight, abs(gc), 1.0)

    return _sweep(sides, float(np.min(x[tail])), x, h, levels, f"product(n={n},k={k})")


def orthant_monomial_harmonicity(spec: ConeSpec, point, h: float = 1e-3, exponent: int = 1) -> ResidualSample:
    """|Laplace(prod_{cone axes} x_i^exponent)| by the stencil.

    ``exponent = 1`` is the harmonic monomial; ``exponent = 2`` with k = 1
    gives Laplace(x_n^2) = 2, a negative control for the same stencil.
    """
    x = _point(point)
    if x.size != spec.n:
        raise DomainError(f"point has dimension {x.size}, expected {spec.n}")
    tail = slice(spec.n - spec.k, spec.n)
    monomial = lambda y: np.prod(y[:, tail] ** exponent, axis=1)  # noqa: E731
    residual = abs(stencil_laplacian(monomial, x, h))
    return ResidualSample(
        point=tuple(float(v) for v in x),
        h=float(h),
        residual=residual,
        order_estimate=float("nan"),
        steps=(float(h),),
        residuals=(residual,),
        effective_steps=(float(h),),
        label=f"monomial(n={spec.n},k={spec.k},p={exponent})",
    )


# ----------------------------------------------------------------------------
# spherical Laplacian


def laplace_beltrami_apply(phi: Callable[[np.ndarray], np.ndarray], sigma, h: float = 1e-2):
    """Laplace-Beltrami of ``phi`` at unit vector(s) ``sigma``.

    Applies the ambient stencil Laplacian to the degree-0 homogeneous
    extension x -> phi(x/|x|) at x = sigma. A single vector returns a float,
    a stack of vectors returns an array.
    """
    s = np.asarray(sigma, dtype=float)
    single = s.ndim == 1
    s = np.atleast_2d(s)
    norms = np.linalg.norm(s, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-12):
        raise DomainError("sigma must be a unit vector (|sigma| = 1 within 1e-12)")
    if not h > 0 or h >= 0.5:
        raise DomainError(f"step must lie in (0, 0.5), got {h!r}")
    m, n = s.shape
    shifts = np.vstack([np.zeros(n), h * np.eye(n), -h * np.eye(n)])
    pts = (s[:, None, :] + shifts[None, :, :]).reshape(-1, n)
    pts = pts / np.linalg.norm(pts, axis=1)[:, None]
    vals = np.asarray(phi(pts), dtype=float).reshape(m, 2 * n + 1)
    c, p, q = vals[:, :1], vals[:, 1:n + 1], vals[:, n + 1:]
    out = np.array([math.fsum(row) for row in (p - 2.0 * c + q)]) / (h * h)
    return float(out[0]) if single else out


def interior_probes(spec: ConeSpec, count: int = 100, seed: int = 0, margin: float = 0.1) -> np.ndarray:
    """Seeded unit vectors inside the section with every cone coordinate above ``margin``."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        g = rng.standard_normal((4 * count, spec.n))
        s = g / np.linalg.norm(g, axis=1)[:, None]
        s[:, spec.n - spec.k:] = np.abs(s[:, spec.n - spec.k:])
        good = s[np.all(s[:, spec.n - spec.k:] > margin, axis=1)]
        out.extend(good[: count - len(out)])
    return np.array(out)


@dataclass(frozen=True)
class EigenRelationReport:
    """Sup-norm of Laplace-Beltrami(phi_k) + lambda_1 phi_k over probes, per step."""

    spec: ConeSpec
    steps: tuple
    sup_residuals: tuple
    order_estimate: float
    probes: int
    seed: int
    passed: bool
    order_target: float = 2.0
    order_tol: float = 0.3

    def as_dict(self) -> dict:
        return {
            "n": self.spec.n,
            "k": self.spec.k,
            "lambda1": principal_eigenvalue(self.spec),
            "steps": list(self.steps),
            "sup_residuals": list(self.sup_residuals),
            "order_estimate": self.order_estimate,
            "probes": self.probes,
            "seed": self.seed,
            "passed": self.passed,
        }


def eigen_relation_sweep(
    spec: ConeSpec,
    steps: Sequence[float] = (0.04, 0.02, 0.01),
    probes: int = 100,
    seed: int = 0,
    order_tol: float = 0.3,
) -> EigenRelationReport:
    """Check Laplace-Beltrami(phi_k) = -lambda_1 phi_k at interior probes, with its O(h^2) rate."""
    phi = angular_eigenfunction(spec)
    lam = principal_eigenvalue(spec)
    sigma = interior_probes(spec, probes, seed)
    base = phi(sigma)
    sups = []
    for h in steps:
        sups.append(float(np.max(np.abs(laplace_beltrami_apply(phi, sigma, h) + lam * base))))
    floors = [8.0 * spec.n * _EPS * float(np.max(np.abs(base))) / (h * h) for h in steps]
    order = fit_order(steps, sups, floors)
    passed = not math.isnan(order) and abs(order - 2.0) <= order_tol
    return EigenRelationReport(spec, tuple(float(h) for h in steps), tuple(sups), order, probes, seed, passed,
                               order_tol=order_tol)


# ----------------------------------------------------------------------------
# smooth test fields


@dataclass(frozen=True)
class SmoothField:
    name: str
    func: Field

    def __call__(self, x):
        return self.func(np.atleast_2d(np.asarray(x, dtype=float)))


def smooth_suite(n: int, seed: int = 0) -> list[SmoothField]:
    """Five fixed smooth fields on R^n; the last two use seeded random coefficients."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=n) / math.sqrt(n)
    b = rng.normal(size=n) / math.sqrt(n)
    c = rng.normal(size=n)
    return [
        SmoothField("exp(x1)sin(xn)", lambda x: np.exp(x[:, 0]) * np.sin(x[:, -1])),
        SmoothField("1/(1+|x|^2)", lambda x: 1.0 / (1.0 + np.sum(x * x, axis=1))),
        SmoothField("cos(x1+2xn)+x1^3 xn", lambda x: np.cos(x[:, 0] + 2.0 * x[:, -1]) + x[:, 0] ** 3 * x[:, -1]),
        SmoothField("exp(a.x)cos(b.x)", lambda x: np.exp(x @ a) * np.cos(x @ b)),
        SmoothField("exp(-|x-c|^2/4)", lambda x: np.exp(-np.sum((x - c) ** 2, axis=1) / 4.0)),
    ]


def _suite_point(spec: ConeSpec, rng) -> np.ndarray:
    x = rng.uniform(-0.5, 0.5, spec.n)
    x[spec.n - spec.k:] = rng.uniform(0.5, 1.5, spec.k)
    return x


@dataclass(frozen=True)
class IdentitySweepReport:
    """Order estimates of identity residuals over the smooth suite.

    ``orders`` holds :func:`sample_order` per field.
    """

    identity: str
    parameters: dict
    samples: tuple
    orders: tuple
    passed: bool
    coherence: float | None = None
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "identity": self.identity,
            "parameters": self.parameters,
            "orders": [None if math.isnan(o) else o for o in self.orders],
            "samples": [s.as_dict() for s in self.samples],
            "passed": self.passed,
            "coherence": self.coherence,
        }


def sample_order(sample: ResidualSample) -> float:
    """Same-step order, or the cross-step order where the stencils cancel exactly."""
    return sample.cross_order if sample.discrete_exact else sample.order_estimate


def _orders_ok(orders, tol):
    return all(not math.isnan(o) and abs(o - 2.0) <= tol for o in orders)


def conjugation_identity_sweep(n: int, l, h: float = 0.2, levels: int = 4, seed: int = 0, order_tol: float = 0.2):
    """Sweep identity (x_n^l conjugation) over the smooth suite at one seeded point per field."""
    lv = float(Fraction(l)) if isinstance(l, str) else float(l)
    rng = np.random.default_rng(seed)
    spec = ConeSpec(n, 1)
    samples = tuple(
        conjugation_identity_residual(f, lv, _suite_point(spec, rng), h, levels) for f in smooth_suite(n, seed)
    )
    orders = tuple(sample_order(s) for s in samples)
    return IdentitySweepReport("conjugation", {"n": n, "l": str(l), "h": h, "levels": levels, "seed": seed},
                               samples, orders, _orders_ok(orders, order_tol))


def product_identity_sweep(spec: ConeSpec, h: float = 0.2, levels: int = 4, seed: int = 0, order_tol: float = 0.2):
    """Sweep the product identity over the suite; at k = 1 also report coherence with l = 1."""
    rng = np.random.default_rng(seed)
    samples = []
    coherence = 0.0 if spec.k == 1 else None
    for f in smooth_suite(spec.n, seed):
        x = _suite_point(spec, rng)
        s = product_identity_residual(f, spec, x, h, levels)
        samples.append(s)
        if spec.k == 1:
            t = conjugation_identity_residual(f, 1.0, x, h, levels)
            coherence = max(coherence, max(abs(a - b) for a, b in zip(s.residuals, t.residuals)))
    orders = tuple(sample_order(s) for s in samples)
    return IdentitySweepReport("product", {**spec.as_dict(), "h": h, "levels": levels, "seed": seed},
                               tuple(samples), orders, _orders_ok(orders, order_tol), coherence)


def write_residual_csv(samples: Sequence[ResidualSample], stream) -> None:
    """Rows (point_id, h, residual) for every step of every sample."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["point_id", "h", "residual"])
    for pid, s in enumerate(samples):
        for h, r in zip(s.effective_steps, s.residuals):
            writer.writerow([pid, repr(float(h)), repr(float(r))])
