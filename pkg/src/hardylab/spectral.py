"""Dirichlet eigenvalues of the spherical Laplacian on orthant sections of S^2.

The sections are the hemisphere (k=1), the quarter-sphere (k=2) and the
octant (k=3). Each is placed in (theta, phi) coordinates so its boundary is a
union of coordinate lines:

* k=1: polar axis e_3, theta in (0, pi/2), phi periodic. The theta grid is
  staggered (theta_i = (i - 1/2) dtheta) so the pole is never a node and the
  equator row is the Dirichlet boundary.
* k=2: polar axis e_1, theta in (0, pi), phi in (0, pi/2). The two meridians
  phi = 0 and phi = pi/2 bound the lune {sigma_2 > 0, sigma_3 > 0}; the poles
  are its corners.
* k=3: polar axis e_3, theta in (0, pi/2), phi in (0, pi/2).

The operator is the conservative 5-point discretization of
-(1/sin t) d_t(sin t d_t) - (1/sin^2 t) d_phi^2 multiplied through by the area
weight sin(theta_i), giving a symmetric stiffness K and diagonal mass W.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from hardylab.cone import ConeSpec, angular_eigenfunction, principal_eigenvalue
from hardylab.errors import CapabilityError, ConvergenceError, DomainError
from hardylab.quadrature import Estimate, QuadratureRule, estimate_order, group_sums, richardson

MIN_RESOLUTION = 8
DEFAULT_SOLVER_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SphericalGrid:
    """Interior nodes of a section in (theta, phi), row-major in theta."""

    k: int
    resolution: tuple
    theta: np.ndarray
    phi: np.ndarray
    dtheta: float
    dphi: float
    periodic: bool

    @property
    def shape(self) -> tuple[int, int]:
        return self.theta.size, self.phi.size

    @property
    def unknowns(self) -> int:
        return self.theta.size * self.phi.size

    def cartesian(self) -> np.ndarray:
        """Unit vectors of the nodes in cone coordinates (last k components positive)."""
        t, p = np.meshgrid(self.theta, self.phi, indexing="ij")
        st, ct = np.sin(t).ravel(), np.cos(t).ravel()
        sp_, cp = np.sin(p).ravel(), np.cos(p).ravel()
        if self.k == 2:
            return np.column_stack([ct, st * cp, st * sp_])
        return np.column_stack([st * cp, st * sp_, ct])

    def describe(self) -> dict:
        return {"k": self.k, "resolution": list(self.resolution), "unknowns": self.unknowns,
                "dtheta": self.dtheta, "dphi": self.dphi}


def _resolution(resolution) -> tuple[int, int]:
    if np.ndim(resolution) == 0:
        res = (int(resolution), int(resolution))
    else:
        res = tuple(int(r) for r in resolution)
    if len(res) != 2 or min(res) < MIN_RESOLUTION:
        raise DomainError(f"resolution must be >= {MIN_RESOLUTION} per direction, got {resolution!r}")
    return res


def build_grid(k: int, resolution) -> SphericalGrid:
    """Grid on the section for k in {1, 2, 3}; ``resolution`` is (n_theta, n_phi) or one int.

    k=1 keeps n_theta - 1 latitude rows (the n_theta-th sits on the equator)
    and n_phi periodic columns. For k = 2, 3 there are n_theta x n_phi interior
    nodes, so doubling the resolution exactly quadruples the unknowns.
    """
    if k not in (1, 2, 3):
        raise CapabilityError(f"grid eigensolves exist only on S^2 sections (k in 1..3), got k={k!r}")
    nt, nphi = _resolution(resolution)
    if k == 1:
        dt = (math.pi / 2) / (nt - 0.5)
        theta = (np.arange(1, nt) - 0.5) * dt
        dp = 2 * math.pi / nphi
        phi = np.arange(nphi) * dp
        periodic = True
    else:
        span = math.pi if k == 2 else math.pi / 2
        dt = span / (nt + 1)
        theta = np.arange(1, nt + 1) * dt
        dp = (math.pi / 2) / (nphi + 1)
        phi = np.arange(1, nphi + 1) * dp
        periodic = False
    return SphericalGrid(k, (nt, nphi), theta, phi, dt, dp, periodic)


@dataclass(frozen=True, eq=False)
class SphericalOperator:
    """Symmetric matrix W^{-1/2} K W^{-1/2} plus the pieces needed to map back to nodal values."""

    grid: SphericalGrid
    matrix: sp.csc_matrix
    stiffness: sp.csr_matrix
    mass: np.ndarray

    def apply(self, u) -> np.ndarray:
        """Discrete -Laplace-Beltrami applied to nodal values: W^{-1} K u."""
        return self.stiffness @ np.asarray(u, dtype=float) / self.mass

    def to_symmetric(self, u) -> np.ndarray:
        return np.sqrt(self.mass) * np.asarray(u, dtype=float)

    def from_symmetric(self, v) -> np.ndarray:
        return np.asarray(v, dtype=float) / np.sqrt(self.mass)


def assemble_operator(grid: SphericalGrid) -> SphericalOperator:
    nt, nphi = grid.shape
    dt, dp = grid.dtheta, grid.dphi
    s = np.sin(grid.theta)
    a_plus = np.sin(grid.theta + dt / 2) / dt ** 2
    a_minus = np.sin(grid.theta - dt / 2) / dt ** 2
    b = 1.0 / (s * dp ** 2)

    idx = np.arange(nt * nphi).reshape(nt, nphi)
    ones = np.ones(nphi)
    diag = np.outer(a_plus + a_minus + 2 * b, ones).ravel()
    rows, cols, vals = [idx.ravel()], [idx.ravel()], [diag]

    # theta neighbours; missing rows are Dirichlet (or the zero-flux pole face)
    rows.append(idx[:-1].ravel()); cols.append(idx[1:].ravel()); vals.append(-np.outer(a_plus[:-1], ones).ravel())
    rows.append(idx[1:].ravel()); cols.append(idx[:-1].ravel()); vals.append(-np.outer(a_minus[1:], ones).ravel())

    # phi neighbours
    if grid.periodic:
        right = np.roll(idx, -1, axis=1)
        rows.append(idx.ravel()); cols.append(right.ravel()); vals.append(-np.repeat(b, nphi))
        rows.append(right.ravel()); cols.append(idx.ravel()); vals.append(-np.repeat(b, nphi))
    else:
        bb = np.repeat(b, nphi - 1)
        rows.append(idx[:, :-1].ravel()); cols.append(idx[:, 1:].ravel()); vals.append(-bb)
        rows.append(idx[:, 1:].ravel()); cols.append(idx[:, :-1].ravel()); vals.append(-bb)

    n = nt * nphi
    K = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    mass = np.repeat(s, nphi)
    scale = sp.diags(1.0 / np.sqrt(mass))
    A = (scale @ K @ scale).tocsc()
    A = ((A + A.T) * 0.5).tocsc()  # remove rounding asymmetry from a_plus[i] vs a_minus[i+1]
    return SphericalOperator(grid, A, K, mass)


@dataclass(frozen=True)
class EigenResult:
    resolution: tuple
    eigenvalue: float
    iterations: int
    residual_norm: float
    extrapolated: float | None = None
    single_signed: bool = True
    unknowns: int = 0
    eigenvector: np.ndarray | None = field(default=None, repr=False, compare=False)

    def as_dict(self) -> dict:
        return {
            "resolution": list(self.resolution),
            "unknowns": self.unknowns,
            "eigenvalue": self.eigenvalue,
            "iterations": self.iterations,
            "residual_norm": self.residual_norm,
            "extrapolated": self.extrapolated,
            "single_signed": self.single_signed,
        }


def seed_vector(operator: SphericalOperator) -> np.ndarray:
    """phi_k sampled at the nodes, in symmetric coordinates."""
    k = operator.grid.k
    phi = angular_eigenfunction(ConeSpec(3, k))
    return operator.to_symmetric(phi(operator.grid.cartesian()))


def smallest_eigenvalue(
    operator: SphericalOperator,
    tol: float = DEFAULT_SOLVER_TOL,
    max_iter: int = 500,
    start: np.ndarray | str | None = None,
    seed: int = 0,
) -> EigenResult:
    """Inverse power iteration on the symmetric operator with one sparse LU factorization.

    ``start`` is a vector, ``"random"`` (seeded) or None for the sampled phi_k.
    The reported residual is the backward error ||A v - lambda v|| / ||A||_1
    for unit v; iteration stops once it is at most ``tol``.
    """
    A = operator.matrix
    norm_a = float(abs(A).sum(axis=0).max())
    if isinstance(start, str):
        if start != "random":
            raise ValueError(f"unknown start {start!r}")
        v = np.random.default_rng(seed).random(A.shape[0]) + 0.1
    elif start is None:
        v = seed_vector(operator)
    else:
        v = np.asarray(start, dtype=float).copy()
    v /= np.linalg.norm(v)
    lu = splu(A)
    lam, res = float("nan"), float("inf")
    history = []
    for it in range(1, max_iter + 1):
        w = lu.solve(v)
        v = w / np.linalg.norm(w)
        Av = A @ v
        lam = float(v @ Av)
        res = float(np.linalg.norm(Av - lam * v)) / norm_a
        history.append(res)
        if res <= tol:
            break
    else:
        raise ConvergenceError(
            f"inverse iteration did not reach tol={tol} in {max_iter} iterations",
            {"eigenvalue": lam, "residual_norm": res, "last_residuals": history[-5:]},
        )
    u = operator.from_symmetric(v)
    if u[np.argmax(np.abs(u))] < 0:
        u = -u
    single = bool(np.min(u) >= -1e-8 * np.max(u))
    return EigenResult(operator.grid.resolution, lam, it, res, None, single, u.size, u)


def solve(k: int, resolution, tol: float = DEFAULT_SOLVER_TOL, start=None) -> EigenResult:
    return smallest_eigenvalue(assemble_operator(build_grid(k, resolution)), tol, start=start)


@dataclass(frozen=True)
class PrincipalEigenvalueReport:
    """Refinement study of lambda_1 on one section against k(k+1)."""

    k: int
    target: int
    results: tuple
    extrapolated: float
    relative_error: float
    raw_relative_error: float
    observed_order: float
    order_flag: str
    tol: float
    passed: bool
    monotone: bool

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "n": 3,
            "target": self.target,
            "extrapolated": self.extrapolated,
            "relative_error": self.relative_error,
            "raw_relative_error": self.raw_relative_error,
            "observed_order": None if not math.isfinite(self.observed_order) else self.observed_order,
            "order_flag": self.order_flag,
            "monotone": self.monotone,
            "tol": self.tol,
            "passed": self.passed,
            "results": [r.as_dict() for r in self.results],
        }


def verify_principal_eigenvalues(k: int, resolutions: Sequence = (32, 64, 128, 256), tol: float = 1e-3,
                         solver_tol: float = DEFAULT_SOLVER_TOL) -> PrincipalEigenvalueReport:
    """Solve at each resolution, Richardson-extrapolate the finest pair at order 2, compare to k(k+1)."""
    if len(resolutions) < 3:
        raise DomainError("need at least 3 resolutions")
    target = principal_eigenvalue(ConeSpec(3, k))
    grids = [build_grid(k, r) for r in resolutions]
    results = [smallest_eigenvalue(assemble_operator(g), solver_tol) for g in grids]
    values = [r.eigenvalue for r in results]
    h = [g.dtheta for g in grids]
    extrap = richardson(values[-2], values[-1], h[-2] / h[-1], 2.0)
    order, flag = estimate_order(values, [1.0 / x for x in h])
    results[-1] = EigenResult(results[-1].resolution, results[-1].eigenvalue, results[-1].iterations,
                              results[-1].residual_norm, extrap, results[-1].single_signed,
                              results[-1].unknowns, results[-1].eigenvector)
    errors = [abs(v - target) for v in values]
    monotone = all(b <= a for a, b in zip(errors, errors[1:]))
    rel = abs(extrap - target) / target
    raw = errors[-1] / target
    passed = rel < tol and all(r.single_signed for r in results)
    return PrincipalEigenvalueReport(k, target, tuple(results), extrap, rel, raw, order, flag, tol, passed, monotone)


def write_convergence_csv(report: PrincipalEigenvalueReport, stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["resolution", "estimate", "error"])
    for r in report.results:
        writer.writerow(["x".join(str(v) for v in r.resolution), repr(r.eigenvalue), repr(r.eigenvalue - report.target)])


# ----------------------------------------------------------------------------
# Rayleigh values for general n


def angular_rayleigh(spec: ConeSpec, rule: QuadratureRule) -> Estimate:
    """int |grad_sigma phi_k|^2 / int phi_k^2 over the section.

    The tangential gradient comes from the homogeneous extension. Stochastic
    rules get a delta-method standard error from per-group sums.
    """
    if rule.dim != spec.n:
        raise DomainError(f"rule dimension {rule.dim} does not match n={spec.n}")
    phi = angular_eigenfunction(spec)
    sigma = rule.nodes
    grad = phi.tangential_gradient(sigma)
    a = rule.weights * np.einsum("ij,ij->i", grad, grad)
    b = rule.weights * phi(sigma) ** 2
    A, B = math.fsum(a), math.fsum(b)
    value = A / B
    if not rule.stochastic:
        return Estimate(value, 0.0)
    ga, gb = group_sums(rule, a), group_sums(rule, b)
    G = ga.size
    stderr = math.sqrt(G * np.var(ga - value * gb, ddof=1)) / B
    return Estimate(value, stderr)
