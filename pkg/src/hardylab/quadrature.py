"""Integration rules over radial intervals, spheres, spherical sections and cone balls.

Rules are immutable value objects holding nodes and positive weights. Sums
use compensated accumulation (``math.fsum``) so a rule and its mirror image
give results that differ by an exact power of two.

Deterministic spherical rules exist only for n = 3 (Gauss-Legendre in both
polar angles on an octant, mirrored across coordinate planes). For n >= 4
the sphere is sampled by seeded Monte Carlo and every integral carries a
standard error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from hardylab.cone import ConeSpec, sphere_volume
from hardylab.errors import CapabilityError, DomainError, EvaluationError

DEFAULT_PANELS = 16
DEFAULT_GRADING = 2.0


class Estimate(NamedTuple):
    value: float
    stderr: float = 0.0


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes, positive weights and provenance of an integration rule.

    ``groups`` labels nodes that share one random draw; standard errors are
    computed from per-group sums so mirrored copies and radial tensor
    factors of one angular sample are not counted as independent.
    """

    nodes: np.ndarray
    weights: np.ndarray
    domain_tag: str
    symmetric_last_k: bool = False
    symmetric_k: int = 0
    stochastic: bool = False
    seed: int | None = None
    groups: np.ndarray | None = None
    log_nodes: np.ndarray | None = None
    log_weights: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        weights = np.asarray(self.weights, dtype=float)
        if nodes.shape[0] != weights.shape[0]:
            raise ValueError("nodes and weights disagree in length")
        if np.any(weights <= 0):
            raise ValueError("quadrature weights must be positive")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def n_groups(self) -> int:
        return 0 if self.groups is None else int(self.groups.max()) + 1

    def describe(self) -> dict:
        """JSON-friendly descriptor: tag, counts and seed."""
        out = {
            "domain_tag": self.domain_tag,
            "nodes": len(self),
            "symmetric_last_k": self.symmetric_last_k,
            "stochastic": self.stochastic,
            "seed": self.seed,
        }
        out.update(self.params)
        return out


def fsum(values) -> float:
    return math.fsum(np.asarray(values, dtype=float).ravel())


def gauss_legendre(a: float, b: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    """m-point Gauss-Legendre nodes and weights on [a, b]."""
    x, w = leggauss(m)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


# ----------------------------------------------------------------------------
# radial rules


def _panel_edges(R: float, panels: int, grading: float) -> np.ndarray:
    if grading == 1.0:
        return np.linspace(0.0, R, panels + 1)
    inner = R * grading ** -np.arange(panels - 1, -1, -1, dtype=float)
    return np.concatenate([[0.0], inner])


def radial_rule(
    R: float,
    points: int,
    grading: float = DEFAULT_GRADING,
    panels: int | None = None,
    inner_substitution: bool | None = None,
) -> QuadratureRule:
    """Composite Gauss-Legendre rule on (0, R], geometrically graded toward 0.

    Panel edges are R q^{-j} with q = ``grading``; ``grading == 1`` gives
    uniform panels. On graded rules the innermost panel [0, h] uses the
    substitution r = h t^2, which makes integrands behaving like r^{-1/2}
    or r^{1/2} polynomial in t. Gauss nodes never include r = 0.
    """
    if not R > 0:
        raise DomainError(f"R must be positive, got {R!r}")
    if points < 2:
        raise DomainError(f"need at least 2 points, got {points}")
    if grading < 1.0:
        raise DomainError(f"grading must be >= 1, got {grading}")
    if panels is None:
        panels = max(1, min(DEFAULT_PANELS, points // 8))
    per_panel = max(2, points // panels)
    edges = _panel_edges(float(R), panels, float(grading))

    if inner_substitution is None:
        inner_substitution = grading > 1.0

    nodes, weights = [], []
    h = edges[1]
    if inner_substitution:
        t, wt = gauss_legendre(0.0, 1.0, per_panel)
        nodes.append(h * t * t)
        weights.append(2.0 * h * t * wt)
    else:
        x, w = gauss_legendre(0.0, h, per_panel)
        nodes.append(x)
        weights.append(w)
    for a, b in zip(edges[1:-1], edges[2:]):
        x, w = gauss_legendre(a, b, per_panel)
        nodes.append(x)
        weights.append(w)
    r = np.concatenate(nodes)
    w = np.concatenate(weights)
    return QuadratureRule(
        nodes=r,
        weights=w,
        domain_tag=f"radial(0,{R:g})",
        log_nodes=np.log(r),
        log_weights=w / r,
        params={"R": float(R), "panels": panels, "per_panel": per_panel, "grading": float(grading),
                "inner_substitution": bool(inner_substitution)},
    )


def log_radial_rule(
    breakpoints: Sequence[float],
    max_width: float = 4.0,
    first_width: float = 0.125,
    per_panel: int = 20,
) -> QuadratureRule:
    """Gauss-Legendre rule in t = ln r between the given log-radius breakpoints.

    Within each interval panels grow geometrically away from its right end,
    capped at ``max_width``. Nodes are kept in log form; ``nodes`` holds
    exp(t), which may underflow to 0 for extreme t and must then not be used.
    """
    bps = [float(b) for b in breakpoints]
    if len(bps) < 2 or any(b >= c for b, c in zip(bps, bps[1:])):
        raise DomainError("breakpoints must be strictly increasing")
    ts, ws = [], []
    for lo, hi in zip(bps[:-1], bps[1:]):
        edges = [hi]
        width = first_width
        while edges[-1] > lo:
            edges.append(max(lo, edges[-1] - width))
            width = min(2.0 * width, max_width)
        edges.reverse()
        for a, b in zip(edges[:-1], edges[1:]):
            x, w = gauss_legendre(a, b, per_panel)
            ts.append(x)
            ws.append(w)
    t = np.concatenate(ts)
    w = np.concatenate(ws)
    with np.errstate(under="ignore"):
        r = np.exp(t)
    # nodes/weights in r are informational; integration uses the log form
    tiny = np.finfo(float).tiny
    safe_r = np.where(r > 0, r, tiny)
    return QuadratureRule(
        nodes=safe_r,
        weights=np.maximum(w * safe_r, tiny),
        domain_tag=f"radial_log({bps[0]:.6g},{bps[-1]:.6g})",
        log_nodes=t,
        log_weights=w,
        params={"breakpoints": bps, "max_width": max_width, "per_panel": per_panel},
    )


# ----------------------------------------------------------------------------
# spherical rules


def _reflect(nodes: np.ndarray, axes: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """All 2^len(axes) sign patterns applied to ``nodes``; returns (nodes, copy index)."""
    blocks, copy_ids = [], []
    m = len(axes)
    for pattern in range(2 ** m):
        block = nodes.copy()
        for bit, axis in enumerate(axes):
            if pattern >> bit & 1:
                block[:, axis] = -block[:, axis]
        blocks.append(block)
        copy_ids.append(np.full(nodes.shape[0], pattern))
    return np.concatenate(blocks), np.concatenate(copy_ids)


def _octant_rule_n3(order) -> tuple[np.ndarray, np.ndarray]:
    if np.ndim(order) == 0:
        n_theta = n_phi = int(order)
    else:
        n_theta, n_phi = (int(v) for v in order)
    if n_theta < 1 or n_phi < 1:
        raise DomainError(f"order must be positive, got {order!r}")
    th, wth = gauss_legendre(0.0, 0.5 * math.pi, n_theta)
    ph, wph = gauss_legendre(0.0, 0.5 * math.pi, n_phi)
    T, P = np.meshgrid(th, ph, indexing="ij")
    WT, WP = np.meshgrid(wth * np.sin(th), wph, indexing="ij")
    st = np.sin(T)
    nodes = np.stack([st * np.cos(P), st * np.sin(P), np.cos(T)], axis=-1).reshape(-1, 3)
    return nodes, (WT * WP).ravel()


def _sphere_rule_n3(order, k: int | None) -> QuadratureRule:
    octant, w = _octant_rule_n3(order)
    # mirror across the free coordinates; the full sphere mirrors all three
    free_axes = [0, 1, 2] if k is None else list(range(0, 3 - k))
    nodes, copies = _reflect(octant, free_axes)
    weights = np.tile(w, 2 ** len(free_axes))
    if k is None:
        tag, sym = "sphere(3)", 3
    else:
        tag, sym = f"cone_section(3,{k})", 0
    return QuadratureRule(
        nodes=nodes,
        weights=weights,
        domain_tag=tag,
        symmetric_last_k=k is None,
        symmetric_k=sym,
        params={"order": list(np.atleast_1d(order).tolist())},
    )


def _sphere_rule_mc(n: int, samples: int, seed: int, k: int | None) -> QuadratureRule:
    if samples < 2:
        raise DomainError("stochastic rules need at least 2 samples")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((int(samples), n))
    sigma = g / np.linalg.norm(g, axis=1, keepdims=True)
    kk = n if k is None else k
    # folding the last kk coordinates is equivalent in law to rejection into the section
    sigma[:, n - kk:] = np.abs(sigma[:, n - kk:])
    measure = sphere_volume(n - 1) / 2 ** kk
    weights = np.full(samples, measure / samples)
    groups = np.arange(samples)
    if k is not None:
        return QuadratureRule(
            nodes=sigma,
            weights=weights,
            domain_tag=f"cone_section({n},{k})",
            stochastic=True,
            seed=seed,
            groups=groups,
            params={"samples": int(samples)},
        )
    section = QuadratureRule(
        nodes=sigma, weights=weights, domain_tag=f"cone_section({n},{n})",
        stochastic=True, seed=seed, groups=groups, params={"samples": int(samples)},
    )
    full = mirror_rule(section, n)
    return QuadratureRule(
        nodes=full.nodes, weights=full.weights, domain_tag=f"sphere({n})",
        symmetric_last_k=True, symmetric_k=n, stochastic=True, seed=seed,
        groups=full.groups, params={"samples": int(samples)},
    )


def sphere_rule(
    n: int,
    order=24,
    restrict_to_cone: int | None = None,
    *,
    seed: int | None = None,
    samples: int = 20000,
) -> QuadratureRule:
    """Rule on S^{n-1}, or on the section S^{n-1} cap R^n_{k+} when ``restrict_to_cone=k``.

    Deterministic (``seed is None``) rules require n = 3; ``order`` is the
    number of Gauss-Legendre nodes per octant in each polar angle (int or
    pair). Stochastic rules draw ``samples`` Gaussian-normalized points.
    """
    if n < 3:
        raise DomainError(f"n must be >= 3, got {n}")
    if restrict_to_cone is not None and not 1 <= restrict_to_cone <= n:
        raise DomainError(f"restrict_to_cone must lie in 1..{n}")
    if seed is None:
        if n != 3:
            raise CapabilityError(
                f"deterministic sphere rules exist only for n = 3 (got n = {n}); "
                "pass seed=... to use the stochastic rule"
            )
        return _sphere_rule_n3(order, restrict_to_cone)
    return _sphere_rule_mc(n, samples, int(seed), restrict_to_cone)


def mirror_rule(rule: QuadratureRule, k: int) -> QuadratureRule:
    """Reflect a rule across the last ``k`` coordinate planes (2^k copies)."""
    d = rule.dim
    if not 1 <= k <= d:
        raise DomainError(f"k must lie in 1..{d}")
    nodes, _ = _reflect(rule.nodes, list(range(d - k, d)))
    copies = 2 ** k
    groups = None if rule.groups is None else np.tile(rule.groups, copies)
    tag = rule.domain_tag.replace("cone_section", "sphere").replace("cone_ball", "ball")
    return QuadratureRule(
        nodes=nodes,
        weights=np.tile(rule.weights, copies),
        domain_tag=f"mirror[{k}]:{tag}",
        symmetric_last_k=True,
        symmetric_k=k,
        stochastic=rule.stochastic,
        seed=rule.seed,
        groups=groups,
        params={**rule.params, "mirrored_axes": k},
    )


def tensor_rule(spec_n: int, radial: QuadratureRule, angular: QuadratureRule, tag: str) -> QuadratureRule:
    r = radial.nodes[:, 0]
    nr, na = len(radial), len(angular)
    nodes = (r[:, None, None] * angular.nodes[None, :, :]).reshape(nr * na, spec_n)
    weights = (radial.weights[:, None] * r[:, None] ** (spec_n - 1) * angular.weights[None, :]).ravel()
    groups = None
    if angular.groups is not None:
        groups = np.tile(angular.groups, nr)
    return QuadratureRule(
        nodes=nodes,
        weights=weights,
        domain_tag=tag,
        symmetric_last_k=angular.symmetric_last_k,
        symmetric_k=angular.symmetric_k,
        stochastic=angular.stochastic,
        seed=angular.seed,
        groups=groups,
        params={"radial": radial.describe(), "angular": angular.describe()},
    )


def cone_ball_rule(
    spec: ConeSpec,
    R: float = 1.0,
    radial_points: int = 12,
    angular_order=16,
    *,
    grading: float = 1.0,
    panels: int | None = 1,
    seed: int | None = None,
    samples: int = 4000,
) -> QuadratureRule:
    """Tensor product of a radial rule on (0, R] and the section rule.

    Weights are w_r * r^{n-1} * w_sigma. For n >= 4 a ``seed`` is required.
    The defaults (one Gauss-Legendre panel) integrate polynomial integrands
    of radial degree < 2 * radial_points exactly.
    """
    radial = radial_rule(R, radial_points, grading=grading, panels=panels)
    angular = sphere_rule(spec.n, angular_order, restrict_to_cone=spec.k, seed=seed, samples=samples)
    return tensor_rule(spec.n, radial, angular, f"cone_ball({spec.n},{spec.k},{R:g})")


def default_cone_ball_rule(spec: ConeSpec, R: float = 1.0, seed: int = 0, samples: int = 4000) -> QuadratureRule:
    """Deterministic rule for n = 3, seeded Monte Carlo otherwise."""
    if spec.n == 3:
        return cone_ball_rule(spec, R)
    return cone_ball_rule(spec, R, seed=seed, samples=samples)


# ----------------------------------------------------------------------------
# integration


def _values(rule: QuadratureRule, f) -> np.ndarray:
    values = np.asarray(f(rule.nodes) if callable(f) else f, dtype=float)
    if values.shape != (len(rule),):
        raise EvaluationError(f"integrand returned shape {values.shape}, expected ({len(rule)},)")
    bad = ~np.isfinite(values)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise EvaluationError(f"non-finite integrand value {values[i]!r} at node {i}: {rule.nodes[i].tolist()}")
    return values


def group_sums(rule: QuadratureRule, weighted: np.ndarray) -> np.ndarray:
    return np.bincount(rule.groups, weights=weighted, minlength=rule.n_groups)


def integrate(rule: QuadratureRule, f: Callable[[np.ndarray], np.ndarray] | np.ndarray) -> Estimate:
    """Sum of w_i f(x_i); stochastic rules also report a standard error.

    ``f`` is either a vectorized callable taking the (N, d) node array or an
    array of precomputed node values.
    """
    values = _values(rule, f)
    weighted = rule.weights * values
    value = fsum(weighted)
    if not rule.stochastic:
        return Estimate(value, 0.0)
    sums = group_sums(rule, weighted)
    g = sums.shape[0]
    stderr = math.sqrt(g) * float(np.std(sums, ddof=1)) if g > 1 else math.inf
    return Estimate(value, stderr)


def integrate_log_radial(rule: QuadratureRule, values) -> float:
    """Sum in the log-radius variable: sum_j w_t[j] values[j] with values given at t_j."""
    if rule.log_weights is None:
        raise DomainError("rule has no log-radius form")
    values = np.asarray(values, dtype=float)
    if np.any(~np.isfinite(values)):
        i = int(np.flatnonzero(~np.isfinite(values))[0])
        raise EvaluationError(f"non-finite integrand at log-radius node t={rule.log_nodes[i]!r}")
    return fsum(rule.log_weights * values)


def rounding_error_estimate(rule: QuadratureRule, values) -> float:
    """Rounding-level error scale of a deterministic sum."""
    return 64.0 * np.finfo(float).eps * fsum(np.abs(rule.weights * np.asarray(values)))


# ----------------------------------------------------------------------------
# convergence studies


@dataclass(frozen=True)
class ConvergenceTable:
    resolution: list[int]
    value: list[float]
    estimated_order: float
    extrapolated: float
    flag: str = "ok"

    def as_dict(self) -> dict:
        return {
            "resolution": list(self.resolution),
            "value": list(self.value),
            "estimated_order": self.estimated_order,
            "extrapolated": self.extrapolated,
            "flag": self.flag,
        }


SPECTRAL_ORDER_THRESHOLD = 8.0


def richardson(coarse: float, fine: float, ratio: float, order: float) -> float:
    """Eliminate the leading error term c h^order from two estimates."""
    return fine + (fine - coarse) / (ratio ** order - 1.0)


def estimate_order(values: Sequence[float], resolutions: Sequence[float]) -> tuple[float, str]:
    """Observed order from the last three values of a refinement sequence."""
    v = np.asarray(values, dtype=float)
    res = np.asarray(resolutions, dtype=float)
    d1, d2 = v[-2] - v[-3], v[-1] - v[-2]
    scale = max(abs(v[-1]), 1e-300)
    tiny = 64 * np.finfo(float).eps * scale
    if abs(d1) <= tiny and abs(d2) <= tiny:
        return math.inf, "converged"
    if abs(d2) <= tiny:
        return math.inf, "spectral"
    if abs(d1) <= tiny or d1 * d2 < 0 or abs(d2) >= abs(d1):
        return math.nan, "non-monotone"
    ratio = res[-1] / res[-2]
    order = math.log(abs(d1) / abs(d2)) / math.log(ratio)
    if order > SPECTRAL_ORDER_THRESHOLD:
        return order, "spectral"
    return order, "ok"


def convergence_study(
    make_rule: Callable[[int], QuadratureRule],
    f,
    resolutions: Sequence[int],
) -> ConvergenceTable:
    """Integrate ``f`` on refining rules and extrapolate.

    The order p comes from successive differences of the last three values;
    the extrapolated value is a Richardson step with that p. Spectrally
    converged sequences return their finest value.
    """
    resolutions = [int(r) for r in resolutions]
    if len(resolutions) < 3:
        raise DomainError("convergence_study needs at least 3 resolutions")
    if any(b <= a for a, b in zip(resolutions, resolutions[1:])):
        raise DomainError("resolutions must be strictly increasing")
    values = [integrate(make_rule(r), f).value for r in resolutions]
    order, flag = estimate_order(values, resolutions)
    if flag == "ok":
        extrapolated = richardson(values[-2], values[-1], resolutions[-1] / resolutions[-2], order)
    else:
        extrapolated = values[-1]
    return ConvergenceTable(resolutions, values, order, extrapolated, flag)
