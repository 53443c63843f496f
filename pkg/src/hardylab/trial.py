"""Admissible test functions on the cone, odd/even extensions and the minimizing family.

All callables are vectorized over an (N, n) array of points. A cone trial
evaluates to zero outside B_R and outside the open cone; its odd extension
is obtained by folding the last k coordinates and multiplying by the
product of their signs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from hardylab.cone import AngularEigenfunction, ConeSpec
from hardylab.errors import DomainError

Field = Callable[[np.ndarray], np.ndarray]


def fd_gradient(evaluate: Field, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Centered finite-difference gradient with step h * min(1, |x|) per point."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    step = h * np.minimum(1.0, np.linalg.norm(x, axis=1))
    grad = np.empty_like(x)
    for j in range(x.shape[1]):
        e = np.zeros(x.shape[1])
        e[j] = 1.0
        xp = x + step[:, None] * e
        xm = x - step[:, None] * e
        grad[:, j] = (evaluate(xp) - evaluate(xm)) / (2.0 * step)
    return grad


@dataclass(frozen=True, eq=False)
class TrialFunction:
    """Test function supported in the closure of B_R intersected with the cone.

    ``kind`` is ``"cone"`` for the function itself, ``"odd"``/``"even"`` for
    its extensions to all of R^n. ``formula``/``formula_gradient`` are the raw
    expressions; support masking is applied by :meth:`evaluate` and
    :meth:`gradient`.
    """

    spec: ConeSpec
    R: float
    formula: Field
    formula_gradient: Field | None
    vanishing_order: int
    descriptor: dict = field(default_factory=dict)
    kind: str = "cone"
    fd_step: float = 1e-5

    def _support(self, x: np.ndarray) -> np.ndarray:
        inside = np.einsum("ij,ij->i", x, x) < self.R ** 2
        if self.kind == "cone":
            inside &= np.all(x[:, self.spec.n - self.spec.k:] > 0, axis=1)
        return inside

    def _fold(self, x):
        if self.kind == "cone":
            return x, None
        tail = x[:, self.spec.n - self.spec.k:]
        folded = x.copy()
        folded[:, self.spec.n - self.spec.k:] = np.abs(tail)
        signs = np.where(tail < 0, -1.0, 1.0)
        return folded, signs

    def evaluate(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        folded, signs = self._fold(x)
        out = np.zeros(x.shape[0])
        mask = self._support(folded)
        if np.any(mask):
            out[mask] = self.formula(folded[mask])
        if self.kind == "odd":
            out *= np.prod(signs, axis=1)
        return out

    __call__ = evaluate

    @property
    def analytic_gradient(self) -> bool:
        return self.formula_gradient is not None

    def gradient(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.formula_gradient is None:
            return fd_gradient(self.evaluate, x, self.fd_step)
        folded, signs = self._fold(x)
        out = np.zeros_like(x)
        mask = self._support(folded)
        if np.any(mask):
            out[mask] = self.formula_gradient(folded[mask])
        if self.kind != "cone":
            tail = slice(self.spec.n - self.spec.k, self.spec.n)
            out[:, tail] *= signs
            if self.kind == "odd":
                out *= np.prod(signs, axis=1)[:, None]
        return out

    def scaled(self, factor: float) -> "TrialFunction":
        f, g = self.formula, self.formula_gradient
        return replace(
            self,
            formula=lambda x: factor * f(x),
            formula_gradient=None if g is None else (lambda x: factor * g(x)),
            descriptor={**self.descriptor, "scale": self.descriptor.get("scale", 1.0) * factor},
        )


def zero_trial(spec: ConeSpec, R: float = 1.0) -> TrialFunction:
    return TrialFunction(
        spec, R,
        lambda x: np.zeros(x.shape[0]),
        lambda x: np.zeros_like(x),
        vanishing_order=spec.k,
        descriptor={"name": "zero"},
    )


# ----------------------------------------------------------------------------
# radial profiles


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Radial factor f on (0, R] with derivative and vanishing order at 0.

    :meth:`scaled` returns h = r^gamma f and dh/dt in the log-radius
    variable t = ln r; reduced quotients are computed from it.
    """

    f: Callable[[np.ndarray], np.ndarray]
    f_prime: Callable[[np.ndarray], np.ndarray]
    vanishing_order: int
    R: float = 1.0
    descriptor: dict = field(default_factory=dict)

    def scaled(self, t, gamma: float):
        t = np.asarray(t, dtype=float)
        r = np.exp(t)
        h = r ** gamma * self.f(r)
        hdot = r ** (gamma + 1.0) * self.f_prime(r) + gamma * h
        return h, hdot

    def default_rule(self):
        from hardylab.quadrature import radial_rule

        return radial_rule(self.R, 128)


def polynomial_profile(coefficients, R: float = 1.0) -> RadialProfile:
    """f(r) = sum_j c_j r^j (coefficients in increasing degree)."""
    poly = np.polynomial.Polynomial(coefficients)
    dpoly = poly.deriv()
    order = next((j for j, c in enumerate(coefficients) if c != 0), len(coefficients))
    return RadialProfile(
        f=lambda r: poly(np.asarray(r, dtype=float)),
        f_prime=lambda r: dpoly(np.asarray(r, dtype=float)),
        vanishing_order=order,
        R=R,
        descriptor={"name": "polynomial", "coefficients": [float(c) for c in coefficients], "R": R},
    )


def bump_profile(l: int, R: float = 1.0, power: int = 3) -> RadialProfile:
    """f(r) = r^l (1 - r^2/R^2)^power, vanishing to order l at 0."""

    def f(r):
        r = np.asarray(r, dtype=float)
        return r ** l * (1.0 - (r / R) ** 2) ** power

    def fp(r):
        r = np.asarray(r, dtype=float)
        b = 1.0 - (r / R) ** 2
        lead = l * r ** (l - 1) * b ** power if l > 0 else 0.0 * r
        return lead - 2.0 * power * r ** (l + 1) / R ** 2 * b ** (power - 1)

    return RadialProfile(f, fp, l, R, {"name": "bump", "l": l, "power": power, "R": R})


@dataclass(frozen=True, eq=False)
class MinimizingProfile(RadialProfile):
    """r^{-(n-2)/2 + eps} (1 - r) times a linear-in-log ramp on [a^2, a].

    The ramp is 0 below a^2 and 1 above a. The factor (1 - r) is the fixed
    outer cutoff. All integrals are evaluated in t = ln r, which is why
    a may be far below the smallest positive double.
    """

    spec: ConeSpec = None
    epsilon: float = 0.0
    log_inner_cut: float = 0.0

    @property
    def breakpoints(self) -> list[float]:
        la = self.log_inner_cut
        return [2.0 * la, la, 0.0]

    def _ramp(self, t):
        la = self.log_inner_cut
        ramp = np.clip((t - 2.0 * la) / (-la), 0.0, 1.0)
        dramp = np.where((t > 2.0 * la) & (t < la), 1.0 / (-la), 0.0)
        return ramp, dramp

    def scaled(self, t, gamma: float):
        t = np.asarray(t, dtype=float)
        mu = gamma - self.spec.gamma + self.epsilon
        ramp, dramp = self._ramp(t)
        with np.errstate(under="ignore"):
            e_mu = np.exp(mu * t)
            e_t = np.exp(t)
        outer = 1.0 - e_t
        h = e_mu * outer * ramp
        hdot = mu * h - e_mu * e_t * ramp + e_mu * outer * dramp
        return h, hdot

    def default_rule(self):
        from hardylab.quadrature import log_radial_rule

        return log_radial_rule(self.breakpoints, max_width=min(4.0, 0.5 / self.epsilon))


def minimizing_profile(spec: ConeSpec, epsilon: float, inner_cut: float | None = None,
                       *, log_inner_cut: float | None = None) -> MinimizingProfile:
    """Near-extremal radial profile for the cone quotient.

    Paired with the principal angular eigenfunction, its quotient tends to the
    sharp constant as epsilon -> 0 and the inner cut a -> 0. ``log_inner_cut``
    (= ln a) may replace ``inner_cut`` for cuts below double range.
    """
    if not 0.0 < epsilon <= 0.5:
        raise DomainError(f"epsilon must lie in (0, 1/2], got {epsilon!r}")
    if (inner_cut is None) == (log_inner_cut is None):
        raise TypeError("pass exactly one of inner_cut or log_inner_cut")
    if inner_cut is not None:
        if not 0.0 < inner_cut < 0.5:
            raise DomainError(f"inner cut must lie in (0, 1/2), got {inner_cut!r}")
        la = math.log(inner_cut)
    else:
        la = float(log_inner_cut)
        if not la < math.log(0.5):
            raise DomainError(f"log inner cut must be < ln(1/2), got {la!r}")
    beta = -spec.gamma + epsilon
    a = math.exp(la)

    def f(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            ramp = np.clip((np.log(r) - 2.0 * la) / (-la), 0.0, 1.0)
            return np.where(r > 0, r ** beta * (1.0 - r) * ramp, 0.0)

    def fp(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            lr = np.log(r)
            ramp = np.clip((lr - 2.0 * la) / (-la), 0.0, 1.0)
            dramp = np.where((lr > 2.0 * la) & (lr < la), 1.0 / (-la * r), 0.0)
            val = r ** beta * ((beta / r) * (1.0 - r) * ramp - ramp + (1.0 - r) * dramp)
            return np.where(r > 0, val, 0.0)

    return MinimizingProfile(
        f=f,
        f_prime=fp,
        vanishing_order=spec.k,
        R=1.0,
        descriptor={"name": "minimizing", "epsilon": epsilon, "log_inner_cut": la, "inner_cut": a},
        spec=spec,
        epsilon=float(epsilon),
        log_inner_cut=la,
    )


# ----------------------------------------------------------------------------
# trial families


def separable_trial(phi: AngularEigenfunction, f: RadialProfile) -> TrialFunction:
    """u(x) = f(|x|) phi(x/|x|) with analytic gradient."""
    spec = phi.spec

    def value(x):
        r = np.linalg.norm(x, axis=1)
        return f.f(r) * phi(x / r[:, None])

    def grad(x):
        r = np.linalg.norm(x, axis=1)
        sigma = x / r[:, None]
        radial = (f.f_prime(r) * phi(sigma))[:, None] * sigma
        angular = (f.f(r) / r)[:, None] * phi.tangential_gradient(sigma)
        return radial + angular

    return TrialFunction(
        spec, f.R, value, grad,
        vanishing_order=f.vanishing_order,
        descriptor={"name": "separable", "spec": spec.as_dict(), "profile": f.descriptor,
                    "normalization": phi.normalization},
    )


def _bump(x, R):
    s2 = np.einsum("ij,ij->i", x, x) / R ** 2
    b = 1.0 - s2
    return b ** 3, -6.0 * b ** 2 / R ** 2


def product_bump_trial(spec: ConeSpec, R: float = 1.0) -> TrialFunction:
    """u(x) = (prod_{i > n-k} x_i) (1 - |x|^2/R^2)^3."""
    tail = slice(spec.n - spec.k, spec.n)

    def value(x):
        b, _ = _bump(x, R)
        return np.prod(x[:, tail], axis=1) * b

    def grad(x):
        b, db_over_r = _bump(x, R)
        m = np.prod(x[:, tail], axis=1)
        g = (m * db_over_r)[:, None] * x
        t = x[:, tail]
        for j in range(spec.k):
            g[:, spec.n - spec.k + j] += np.prod(np.delete(t, j, axis=1), axis=1) * b
        return g

    return TrialFunction(spec, R, value, grad, vanishing_order=spec.k,
                         descriptor={"name": "product_bump", "spec": spec.as_dict(), "R": R})


def monomial_exponents(n: int, count: int) -> list[tuple[int, ...]]:
    """First ``count`` exponent tuples in graded order (degree 0, 1, 2, ...)."""
    out: list[tuple[int, ...]] = []
    degree = 0
    while len(out) < count:
        for combo in itertools.combinations_with_replacement(range(n), degree):
            alpha = [0] * n
            for i in combo:
                alpha[i] += 1
            out.append(tuple(alpha))
            if len(out) == count:
                break
        degree += 1
    return out


def _polynomial_factor(exponents, coefficients):
    E = np.asarray(exponents, dtype=int)
    c = np.asarray(coefficients, dtype=float)
    top = int(E.max()) if E.size else 0

    def monomials(powers, E):
        out = np.ones((powers.shape[1], E.shape[0]))
        for b, alpha in enumerate(E):
            for j, e in enumerate(alpha):
                if e:
                    out[:, b] *= powers[e, :, j]
        return out

    def power_table(x):
        table = np.ones((top + 1,) + x.shape)
        for p in range(1, top + 1):
            table[p] = table[p - 1] * x
        return table

    def value(x):
        return monomials(power_table(x), E) @ c

    def grad(x):
        table = power_table(x)
        out = np.zeros_like(x)
        for j in range(x.shape[1]):
            active = E[:, j] > 0
            if not np.any(active):
                continue
            Ej = E[active].copy()
            Ej[:, j] -= 1
            out[:, j] = monomials(table, Ej) @ (c[active] * E[active, j])
        return out

    return value, grad


def polynomial_bump_trial(spec: ConeSpec, R: float, exponents, coefficients, descriptor=None) -> TrialFunction:
    """u(x) = (prod_{i > n-k} x_i) P(x) (1 - |x|^2/R^2)^3 with P = sum c_a x^a."""
    base = product_bump_trial(spec, R)
    pv, pg = _polynomial_factor(exponents, coefficients)

    def value(x):
        return base.formula(x) * pv(x)

    def grad(x):
        return base.formula_gradient(x) * pv(x)[:, None] + base.formula(x)[:, None] * pg(x)

    return TrialFunction(spec, R, value, grad, vanishing_order=spec.k, descriptor=descriptor or {
        "name": "polynomial_bump", "spec": spec.as_dict(), "R": R})


def random_trial(spec: ConeSpec, R: float = 1.0, basis_size: int = 6, seed: int = 0,
                 rule=None, max_resamples: int = 10) -> TrialFunction:
    """Seeded random product-bump combination, normalized to unit Hardy term.

    The basis is the first ``basis_size`` monomials (graded order) times the
    orthant monomial and the radial bump. A numerically null draw is redrawn
    with seed + 1 and the redraw is recorded in the descriptor.
    """
    from hardylab.functionals import hardy_term
    from hardylab.quadrature import default_cone_ball_rule

    if basis_size < 1:
        raise DomainError(f"basis_size must be >= 1, got {basis_size}")
    if rule is None:
        rule = default_cone_ball_rule(spec, R, seed=0)
    # rules store R in their tag; a rule for another radius would mis-normalize silently
    exponents = monomial_exponents(spec.n, basis_size)
    resampled = []
    draw_seed = int(seed)
    for _ in range(max_resamples + 1):
        coefficients = np.random.default_rng(draw_seed).standard_normal(basis_size)
        descriptor = {
            "name": "random", "spec": spec.as_dict(), "R": R, "basis_size": basis_size,
            "seed": int(seed), "draw_seed": draw_seed, "resampled_seeds": list(resampled),
        }
        u = polynomial_bump_trial(spec, R, exponents, coefficients, descriptor)
        h = hardy_term(u, rule)
        if h > 1e-12:
            scale = 1.0 / math.sqrt(h)
            return polynomial_bump_trial(spec, R, exponents, coefficients * scale,
                                         {**descriptor, "coefficients": (coefficients * scale).tolist()})
        resampled.append(draw_seed)
        draw_seed += 1
    raise DomainError(f"random_trial: {max_resamples} consecutive degenerate draws from seed {seed}")


def odd_extension(u: TrialFunction) -> TrialFunction:
    """Extension odd in each of the last k coordinates."""
    if u.kind != "cone":
        raise DomainError("odd_extension expects a cone trial")
    return replace(u, kind="odd", descriptor={**u.descriptor, "extension": "odd"})


def even_extension(u: TrialFunction) -> TrialFunction:
    """Extension even in each of the last k coordinates (negative control)."""
    if u.kind != "cone":
        raise DomainError("even_extension expects a cone trial")
    return replace(u, kind="even", descriptor={**u.descriptor, "extension": "even"})
