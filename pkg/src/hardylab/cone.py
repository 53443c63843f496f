"""Exact constants, eigenvalue formulas and the angular eigenfunction of the orthant cone.

The cone is R^n_{k+} = R^{n-k} x (R_+)^k, i.e. the last ``k`` coordinates are
positive. Exact constants are returned as :class:`fractions.Fraction` (or
``int``); callers convert to ``float`` where a numeric value is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np
from numpy.polynomial.hermite import hermgauss

from hardylab.errors import AccuracyError, DomainError


@dataclass(frozen=True)
class ConeSpec:
    """Ambient dimension ``n`` and number ``k`` of positive half-line factors."""

    n: int
    k: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or not isinstance(self.k, (int, np.integer)):
            raise DomainError(f"n and k must be integers, got n={self.n!r}, k={self.k!r}")
        if self.n < 3:
            raise DomainError(f"n must be >= 3, got {self.n}")
        if not 1 <= self.k <= self.n:
            raise DomainError(f"k must satisfy 1 <= k <= n={self.n}, got {self.k}")

    @property
    def cone_axes(self) -> tuple[int, ...]:
        """Zero-based indices of the constrained coordinates x_{n-k+1}, ..., x_n."""
        return tuple(range(self.n - self.k, self.n))

    @property
    def gamma(self) -> float:
        """(n - 2) / 2, the critical radial exponent."""
        return (self.n - 2) / 2

    def contains(self, x) -> np.ndarray:
        """Boolean mask of points strictly inside the cone."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.all(x[:, self.n - self.k:] > 0, axis=1)

    def as_dict(self) -> dict:
        return {"n": int(self.n), "k": int(self.k)}


def _check_n(n):
    if int(n) != n or n < 3:
        raise DomainError(f"n must be an integer >= 3, got {n!r}")


def hardy_constant(spec: ConeSpec) -> Fraction:
    """Sharp Hardy constant (n - 2 + 2k)^2 / 4 of the cone."""
    return Fraction((spec.n - 2 + 2 * spec.k) ** 2, 4)


def principal_eigenvalue(spec: ConeSpec) -> int:
    """Dirichlet principal eigenvalue k(n + k - 2) of the spherical section."""
    return spec.k * (spec.n + spec.k - 2)


def degree_eigenvalue(n: int, l: int) -> int:
    """Eigenvalue l(n + l - 2) of -Laplace-Beltrami on degree-l spherical harmonics."""
    _check_n(n)
    if int(l) != l or l < 0:
        raise DomainError(f"degree l must be a nonnegative integer, got {l!r}")
    return int(l) * (int(n) + int(l) - 2)


def as_half_integer(l) -> Fraction:
    if isinstance(l, str):
        value = Fraction(l)
    elif isinstance(l, (Rational, int)):
        value = Fraction(l)
    else:
        value = Fraction(float(l))
    if value <= 0 or (2 * value).denominator != 1:
        raise DomainError(f"l must be a positive half-integer (1/2, 1, 3/2, ...), got {l!r}")
    return value


def weighted_halfspace_constant(n: int, l) -> Fraction:
    """Constant (n + 2l - 2)^2 / 4 of the weighted half-space inequality."""
    _check_n(n)
    lv = as_half_integer(l)
    return (n + 2 * lv - 2) ** 2 / 4


@dataclass(frozen=True)
class SharpConstants:
    """Bundle of the exact constants attached to a cone."""

    spec: ConeSpec

    @property
    def hardy(self) -> Fraction:
        return hardy_constant(self.spec)

    @property
    def lambda1(self) -> int:
        return principal_eigenvalue(self.spec)

    def degree_eigenvalue(self, l: int) -> int:
        return degree_eigenvalue(self.spec.n, l)

    def weighted_halfspace(self, l) -> Fraction:
        return weighted_halfspace_constant(self.spec.n, l)

    def as_dict(self) -> dict:
        return {
            "n": self.spec.n,
            "k": self.spec.k,
            "hardy": str(self.hardy),
            "hardy_float": float(self.hardy),
            "free_part": str(Fraction((self.spec.n - 2) ** 2, 4)),
            "lambda1": self.lambda1,
        }


def sphere_volume(d: int) -> float:
    """Surface measure |S^d| = 2 pi^{(d+1)/2} / Gamma((d+1)/2)."""
    if int(d) != d or d < 0:
        raise DomainError(f"sphere dimension must be a nonnegative integer, got {d!r}")
    return 2.0 * math.pi ** ((d + 1) / 2) / math.gamma((d + 1) / 2)


def _check_unit_interval(s):
    s = np.asarray(s, dtype=float)
    if np.any(~np.isfinite(s)) or np.any(s <= 0.0) or np.any(s > 1.0):
        raise DomainError("iterated_log requires 0 < s <= 1")
    return s


def iterated_logs(m: int, *, s=None, log_s=None) -> np.ndarray:
    """Stack X_1(s), ..., X_m(s) along a new leading axis.

    Either ``s`` or ``log_s`` must be given; ``log_s`` avoids underflow for
    radii far below the smallest double.
    """
    if int(m) != m or m < 1:
        raise DomainError(f"depth must be a positive integer, got {m!r}")
    if (s is None) == (log_s is None):
        raise TypeError("pass exactly one of s or log_s")
    if s is not None:
        log_s = np.log(_check_unit_interval(s))
    else:
        log_s = np.asarray(log_s, dtype=float)
        if np.any(log_s > 0.0) or np.any(np.isnan(log_s)):
            raise DomainError("iterated_log requires log(s) <= 0")
    out = np.empty((int(m),) + np.shape(log_s))
    x = 1.0 / (1.0 - log_s)
    out[0] = x
    for i in range(1, int(m)):
        x = 1.0 / (1.0 - np.log(x))
        out[i] = x
    return out


def iterated_log(i: int, s):
    """X_i(s) with X_1(s) = 1 / (1 - ln s) and X_i = X_1 o X_{i-1}.

    Defined for 0 < s <= 1; the values lie in (0, 1] and X_i(1) = 1.
    """
    values = iterated_logs(i, s=s)[-1]
    return float(values) if np.ndim(values) == 0 else values


@dataclass(frozen=True)
class AngularEigenfunction:
    """phi(sigma) = N * prod_{i > n-k} sigma_i, normalized on the spherical section.

    Off the section the formula gives the odd extension in the last ``k``
    coordinates; it is positive in the interior of the section.
    """

    spec: ConeSpec
    normalization: float

    @property
    def eigenvalue(self) -> int:
        return principal_eigenvalue(self.spec)

    def __call__(self, sigma) -> np.ndarray:
        sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
        return self.normalization * np.prod(sigma[:, self.spec.n - self.spec.k:], axis=1)

    def extension(self, x) -> np.ndarray:
        """Degree-0 homogeneous extension x -> phi(x / |x|)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.linalg.norm(x, axis=1)
        return self(x / r[:, None])

    def tangential_gradient(self, sigma) -> np.ndarray:
        """Gradient of the homogeneous extension at unit vectors ``sigma``."""
        sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
        n, k = self.spec.n, self.spec.k
        tail = sigma[:, n - k:]
        prod = np.prod(tail, axis=1)
        grad = -k * sigma * prod[:, None]
        for j in range(k):
            others = np.prod(np.delete(tail, j, axis=1), axis=1)
            grad[:, n - k + j] += others
        return self.normalization * grad


def _section_square_integral_n3(spec: ConeSpec, tol: float) -> float:
    from hardylab.quadrature import integrate, sphere_rule

    previous = None
    for order in (8, 16, 32, 64):
        rule = sphere_rule(3, order, restrict_to_cone=spec.k)
        value = integrate(rule, lambda s: np.prod(s[:, 3 - spec.k:] ** 2, axis=1)).value
        if previous is not None and abs(value - previous) <= tol * abs(value):
            return value
        previous = value
    raise AccuracyError(f"section quadrature for {spec} did not converge below tol={tol}")


def _section_square_integral_gauss(spec: ConeSpec, tol: float) -> float:
    # For a homogeneous p of degree d: int_{R^n} p e^{-|x|^2} dx = Gamma((n+d)/2)/2 * int_S p.
    # prod x_i^2 is separable, so the Gaussian moment is a product of 1D Gauss-Hermite sums.
    previous = None
    for nodes in (4, 8, 16):
        x, w = hermgauss(nodes)
        m0 = math.fsum(w)
        m2 = math.fsum(w * x * x)
        full = m2 ** spec.k * m0 ** (spec.n - spec.k)
        value = 2.0 * full / math.gamma((spec.n + 2 * spec.k) / 2) / 2 ** spec.k
        if previous is not None and abs(value - previous) <= tol * abs(value):
            return value
        previous = value
    raise AccuracyError(f"Gauss-Hermite reduction for {spec} did not converge below tol={tol}")


def angular_eigenfunction(spec: ConeSpec, tol: float = 1e-12) -> AngularEigenfunction:
    """Principal angular eigenfunction normalized to unit L^2 norm on the section."""
    if spec.n == 3:
        mass = _section_square_integral_n3(spec, tol)
    else:
        mass = _section_square_integral_gauss(spec, tol)
    return AngularEigenfunction(spec, 1.0 / math.sqrt(mass))
