"""Epsilon sweeps of the minimizing family and extrapolation of its quotients.

For the profile r^{-(n-2)/2 + eps}(1 - r) paired with phi_k, the reduced
quotient minus the sharp constant is eps(1 + eps) once the inner cut is
negligible, so a two-level Richardson tableau in eps (orders 1 and 2)
recovers the constant. The inner cut defaults to ln a = -18 / eps, far below
double range; the log-radius quadrature makes that harmless.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

from hardylab.cone import ConeSpec, hardy_constant, principal_eigenvalue
from hardylab.errors import DomainError
from hardylab.functionals import reduced_radial_quotient
from hardylab.trial import minimizing_profile

DEFAULT_EPSILONS = (0.2, 0.1, 0.05, 0.025)
LOG_CUT_FACTOR = 18.0


def auto_log_inner_cut(epsilon: float) -> float:
    return -LOG_CUT_FACTOR / epsilon


def richardson_tableau(eps: Sequence[float], values: Sequence[float], orders: Sequence[int] = (1, 2)) -> list[list[float]]:
    """Neville-style elimination of c_1 eps^{p_1}, c_2 eps^{p_2}, ... for arbitrary eps spacing."""
    table = [list(map(float, values))]
    for level, p in enumerate(orders, start=1):
        prev = table[-1]
        row = []
        for i in range(1, len(prev)):
            e0, e1 = eps[i - 1 + level - 1], eps[i + level - 1]
            ratio = (e0 / e1) ** p
            row.append(prev[i] + (prev[i] - prev[i - 1]) / (ratio - 1.0))
        if not row:
            break
        table.append(row)
    return table


@dataclass
class SharpnessReport:
    spec: ConeSpec
    constant: float
    epsilons: list
    quotients: list
    margins: list
    log_inner_cuts: list
    extrapolated: float
    relative_error: float
    decreasing: bool
    above_constant: bool
    tol: float
    passed: bool
    tableau: list = field(default_factory=list)

    def rows(self) -> list[tuple[float, float, float]]:
        return list(zip(self.epsilons, self.quotients, self.margins))

    def as_dict(self) -> dict:
        return {
            "n": self.spec.n,
            "k": self.spec.k,
            "constant": self.constant,
            "epsilons": self.epsilons,
            "quotients": self.quotients,
            "margins": self.margins,
            "log_inner_cuts": self.log_inner_cuts,
            "extrapolated": self.extrapolated,
            "relative_error": self.relative_error,
            "decreasing": self.decreasing,
            "above_constant": self.above_constant,
            "tol": self.tol,
            "passed": self.passed,
        }


def sharpness_sweep(
    spec: ConeSpec,
    epsilons: Sequence[float] = DEFAULT_EPSILONS,
    log_inner_cut: float | None = None,
    tol: float = 1e-3,
) -> SharpnessReport:
    """Reduced quotients of the minimizing family over ``epsilons`` and their extrapolated limit.

    ``margins`` are Q(eps) - C. Passing requires every margin >= 0, strictly
    decreasing margins along decreasing eps, and the extrapolated limit within
    ``tol`` relative of C.
    """
    eps = sorted((float(e) for e in epsilons), reverse=True)
    if len(eps) < 2:
        raise DomainError("need at least two epsilon values")
    C = float(hardy_constant(spec))
    lam = principal_eigenvalue(spec)
    quotients, cuts = [], []
    for e in eps:
        la = auto_log_inner_cut(e) if log_inner_cut is None else float(log_inner_cut)
        f = minimizing_profile(spec, e, log_inner_cut=la)
        quotients.append(reduced_radial_quotient(spec, f, lam))
        cuts.append(la)
    margins = [q - C for q in quotients]
    tableau = richardson_tableau(eps, quotients, orders=(1, 2)[: len(eps) - 1])
    extrap = tableau[-1][-1]
    rel = abs(extrap - C) / C
    decreasing = all(b < a for a, b in zip(margins, margins[1:]))
    above = all(m >= -1e-12 * C for m in margins)
    return SharpnessReport(spec, C, eps, quotients, margins, cuts, extrap, rel, decreasing, above, tol,
                           decreasing and above and rel < tol, tableau)


def write_sweep_csv(report: SharpnessReport, stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["epsilon", "quotient", "margin"])
    for e, q, m in report.rows():
        writer.writerow([repr(e), repr(q), repr(m)])
